// Drives the line protocol in-process for a six-arm platform where H1
// overlaps H2, and H2 overlaps H3 and H4. Levels are issued when an arm
// enters and decisions arrive when it leaves, out of index order.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "addis/addis.hpp"

using namespace addis;

int main() {
    stream::StreamOptions opts;
    opts.procedure.name = "graph-conf";
    opts.procedure.defaults = resolve_defaults("graph-conf", {}, {}, {}, GammaSpec::basel());
    stream::StreamSession session(opts);

    const char* events[] = {
        "# arm 1 enters alone",
        "H 1",
        "P 1 0.004",
        "H 2 conflicts=1",
        "H 3 conflicts=2",
        "# arm 3 finishes before arm 2",
        "P 3 0.71",
        "H 4 conflicts=2",
        "P 2 0.35",
        "P 4 0.019",
        "H 5 conflicts=4",
        "H 6 conflicts=5",
        "P 9 0.1",
        "P 5 0.0009",
        "P 6 0.5",
    };
    const auto snap = (std::filesystem::temp_directory_path() / "demo_stream.snapshot").string();
    for (const char* e : events) {
        const auto reply = session.handle(e);
        std::printf("%-22s %s\n", e, reply.c_str());
        if (std::string(e) == "P 2 0.35") {
            std::printf("%-22s %s\n", "SNAPSHOT", session.handle("SNAPSHOT " + snap).c_str());
        }
    }

    std::ifstream in(snap);
    auto resumed = stream::StreamSession::resume(in);
    std::printf("\nresumed from %s after %zu registrations; replaying the tail:\n", snap.c_str(),
                resumed.engine().registered());
    for (const char* e : {"P 4 0.019", "H 5 conflicts=4", "H 6 conflicts=5"})
        std::printf("%-22s %s\n", e, resumed.handle(e).c_str());
    std::filesystem::remove(snap);
    return 0;
}
