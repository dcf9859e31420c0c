#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "addis/addis.hpp"

namespace {

using namespace addis;

constexpr int exit_failed_checks = 1;
constexpr int exit_error = 2;

std::string fixed(double x, bool full) {
    char buf[48];
    std::snprintf(buf, sizeof buf, full ? "%.17g" : "%.4f", x);
    return buf;
}

struct SimulateArgs {
    std::string grid;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<unsigned> threads;
    std::string out = "-";
    std::string dump;
    bool check = false;
    bool quiet = false;
};

int simulate(const SimulateArgs& a) {
    std::ifstream cfg(a.grid);
    if (!cfg) throw Error(Errc::InvalidConfig, "cannot open grid file " + a.grid);
    auto g = sim::parse_grid(cfg);
    if (a.seed) g.seed = *a.seed;
    if (a.trials) g.trials = *a.trials;
    if (a.threads) g.threads = *a.threads;
    g.check = g.check || a.check;

    std::unique_ptr<std::ofstream> dump_file;
    std::unique_ptr<sim::TrajectoryWriter> writer;
    sim::TrajectorySink sink;
    if (!a.dump.empty()) {
        dump_file = std::make_unique<std::ofstream>(a.dump);
        if (!*dump_file) throw Error(Errc::InvalidConfig, "cannot write " + a.dump);
        writer = std::make_unique<sim::TrajectoryWriter>(*dump_file);
        sink = [&](const sim::GridPoint& pt, std::size_t t, const sim::TrialData& d, const sim::TrialOutcome& o) {
            (*writer)(pt, t, d, o);
        };
    }
    const auto total = sim::expand_grid(g).size();
    std::size_t done = 0, failures = 0;
    const auto rows = sim::run_grid(g, sink, [&](const sim::GridRow& r) {
        ++done;
        failures += r.condition_failures;
        if (!a.quiet) std::cerr << "[" << done << "/" << total << "] " << sim::describe(r.point) << "\n";
    });

    if (a.out == "-") {
        sim::write_csv(std::cout, g, rows);
    } else {
        std::ofstream out(a.out);
        if (!out) throw Error(Errc::InvalidConfig, "cannot write " + a.out);
        sim::write_csv(out, g, rows);
    }
    if (g.check) {
        std::cerr << "condition check: " << failures << " failing trajectories\n";
        if (failures) return exit_failed_checks;
    }
    return 0;
}

struct StreamArgs {
    std::string procedure = "graph-conf";
    std::optional<double> alpha, tau, lambda, w0;
    std::string gamma = "basel";
    double rho = 0.5;
    bool full = false;
    std::string resume;
};

int stream_cmd(const StreamArgs& a) {
    std::unique_ptr<stream::StreamSession> s;
    if (!a.resume.empty()) {
        std::ifstream in(a.resume);
        if (!in) throw Error(Errc::InvalidConfig, "cannot open snapshot " + a.resume);
        s = std::make_unique<stream::StreamSession>(stream::StreamSession::resume(in));
    } else {
        stream::StreamOptions o;
        o.procedure.name = a.procedure;
        o.procedure.defaults = resolve_defaults(a.procedure, a.alpha, a.tau, a.lambda, GammaSpec::parse(a.gamma));
        o.procedure.w0 = a.w0;
        o.procedure.rho = a.rho;
        o.full_precision = a.full;
        s = std::make_unique<stream::StreamSession>(o);
    }
    s->run(std::cin, std::cout);
    return 0;
}

struct ReplayArgs {
    std::string study;
    std::vector<std::string> procedures{"graph-conf-u", "spending-local"};
    std::vector<double> qs;
    bool full = false;
    bool levels = false;
};

int replay_cmd(const ReplayArgs& a) {
    std::ifstream in(a.study);
    if (!in) throw Error(Errc::MissingData, "study file " + a.study + " not found");
    const auto st = replay::parse_study(in);
    std::vector<std::optional<double>> qs;
    for (double q : a.qs) qs.push_back(q);
    if (qs.empty()) qs.push_back(std::nullopt);
    std::vector<replay::ReplayReport> reports;
    for (const auto& proc : a.procedures)
        for (const auto& q : qs) reports.push_back(replay::replay_study(st, proc, q));
    std::cout << "procedure,q,rejections,future_level\n";
    for (const auto& r : reports) {
        std::cout << r.procedure << ',' << r.q << ',' << r.rejections << ',' << fixed(r.future_level, a.full) << "\n";
        if (a.levels)
            for (std::size_t i = 0; i < r.levels.size(); ++i)
                std::cout << "#  " << st.hypotheses[i].label << " level=" << fixed(r.levels[i], true)
                          << (r.rejected[i] ? " reject" : " accept") << "\n";
    }
    return 0;
}

struct VerifyArgs {
    std::string suite = "all";
    std::optional<std::size_t> n;
    std::optional<std::size_t> seeds;
    std::uint64_t seed = 1;
    std::uint64_t samples = 1000000;
};

int verify_cmd(const VerifyArgs& a) {
    std::vector<verify::SuiteResult> results;
    auto want = [&](const char* s) { return a.suite == "all" || a.suite == s; };
    if (want("budget")) results.push_back(verify::budget_suite(a.n.value_or(12), a.seeds.value_or(10), a.seed));
    if (want("closure")) results.push_back(verify::closure_suite(a.n.value_or(8), a.seeds.value_or(50), a.seed));
    if (want("improvement"))
        results.push_back(verify::improvement_suite(a.n.value_or(50), a.seeds.value_or(20), a.seed));
    if (want("alpha-c")) results.push_back(verify::alpha_c_suite(a.samples, a.seed));
    bool pass = true;
    for (const auto& r : results) {
        for (const auto& l : r.lines) std::cout << r.suite << ": " << l << "\n";
        std::cout << r.suite << ": " << (r.pass ? "PASS" : "FAIL") << "\n";
        pass = pass && r.pass;
    }
    return pass ? 0 : exit_failed_checks;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online multiple testing with conflict sets: simulation, live streams, study replay, oracles"};
    app.require_subcommand(1);

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "run a parameter grid and write a metrics CSV");
    sim_cmd->add_option("--grid", sa.grid, "grid config file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sa.seed, "master seed (overrides the config)");
    sim_cmd->add_option("--trials", sa.trials, "trials per grid point (overrides the config)");
    sim_cmd->add_option("--threads", sa.threads, "worker threads (overrides the config)");
    sim_cmd->add_option("--out", sa.out, "CSV path, '-' for stdout");
    sim_cmd->add_option("--dump", sa.dump, "write every trajectory to this CSV");
    sim_cmd->add_flag("--check", sa.check, "check the budget condition on every trajectory; exit 1 on failure");
    sim_cmd->add_flag("--quiet", sa.quiet, "no progress on stderr");

    StreamArgs st;
    auto* stream_sub = app.add_subcommand("stream", "line protocol on stdin/stdout");
    stream_sub->add_option("--procedure", st.procedure, "engine name");
    stream_sub->add_option("--alpha", st.alpha);
    stream_sub->add_option("--tau", st.tau, "default tau for hypotheses registered without one");
    stream_sub->add_option("--lambda", st.lambda, "default lambda");
    stream_sub->add_option("--gamma", st.gamma, "logq | basel | power:<s> | geometric:<q>");
    stream_sub->add_option("--w0", st.w0, "initial wealth (fdr-graph)");
    stream_sub->add_option("--rho", st.rho, "within-batch correlation (adaptive-graph-corr)");
    stream_sub->add_flag("--full-precision", st.full, "print levels with 17 significant digits");
    stream_sub->add_option("--resume", st.resume, "continue from a snapshot file")->check(CLI::ExistingFile);

    ReplayArgs ra;
    auto* replay_sub = app.add_subcommand("replay", "replay a recorded platform study");
    replay_sub->add_option("--study", ra.study, "study file")->required();
    replay_sub->add_option("--procedure", ra.procedures, "procedures to run")->delimiter(',');
    replay_sub->add_option("--q", ra.qs, "geometric gamma parameter(s)")->delimiter(',');
    replay_sub->add_flag("--full-precision", ra.full, "print future levels with 17 significant digits");
    replay_sub->add_flag("--levels", ra.levels, "list per-hypothesis levels and decisions");

    VerifyArgs va;
    auto* verify_sub = app.add_subcommand("verify", "run an oracle suite; exit 0 iff it passes");
    verify_sub->add_option("--suite", va.suite)->check(CLI::IsMember({"budget", "closure", "improvement", "alpha-c", "all"}));
    verify_sub->add_option("--n", va.n, "horizon");
    verify_sub->add_option("--seeds", va.seeds, "number of random instances");
    verify_sub->add_option("--seed", va.seed, "RNG seed");
    verify_sub->add_option("--samples", va.samples, "simulation draws per alpha-c cell");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim_cmd) return simulate(sa);
        if (*stream_sub) return stream_cmd(st);
        if (*replay_sub) return replay_cmd(ra);
        if (*verify_sub) return verify_cmd(va);
    } catch (const Error& e) {
        std::cerr << "error: " << errc_name(e.code()) << ": " << e.detail() << "\n";
        return exit_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
