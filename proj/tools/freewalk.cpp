// freewalk: seeded experiments on random walks over free groups - boundary
// measures, subgroup algebra, tracking statistics, and induced kernel
// measures.  Every data-producing run writes a manifest that replays to
// byte-identical outputs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "freewalk/boundary.hpp"
#include "freewalk/cesaro.hpp"
#include "freewalk/io.hpp"
#include "freewalk/manifest.hpp"
#include "freewalk/measure.hpp"
#include "freewalk/quotient.hpp"
#include "freewalk/schreier.hpp"
#include "freewalk/stallings.hpp"
#include "freewalk/tracking.hpp"
#include "freewalk/version.hpp"
#include "freewalk/walk.hpp"

namespace fw = freewalk;
using nlohmann::json;

namespace {

// "0,2,4,...,20" denotes the arithmetic progression it starts; plain
// comma-separated lists pass through.
std::vector<int> parse_int_list(const std::string& spec) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t end = spec.find(',', pos);
        if (end == std::string::npos) end = spec.size();
        tokens.push_back(spec.substr(pos, end - pos));
        pos = end + 1;
    }
    std::vector<int> out;
    auto ellipsis = std::find(tokens.begin(), tokens.end(), "...");
    try {
        if (ellipsis != tokens.end()) {
            auto idx = ellipsis - tokens.begin();
            if (idx < 2 || static_cast<std::size_t>(idx) + 1 >= tokens.size())
                throw fw::InputError("progression needs two leading terms and an end: " + spec);
            int first = std::stoi(tokens[0]);
            int step = std::stoi(tokens[1]) - first;
            int last = std::stoi(tokens.back());
            if (step <= 0) throw fw::InputError("progression must increase: " + spec);
            for (int r = first; r <= last; r += step) out.push_back(r);
        } else {
            for (auto& t : tokens)
                if (!t.empty()) out.push_back(std::stoi(t));
        }
    } catch (const std::invalid_argument&) {
        throw fw::InputError("bad integer list '" + spec + "'");
    }
    if (out.empty()) throw fw::InputError("empty integer list");
    return out;
}

// Collects outputs of one run and drops a manifest next to the primary one.
class RunRecorder {
public:
    RunRecorder(std::string command, json params, std::uint64_t seed)
        : start_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.params = std::move(params);
        manifest_.seed = seed;
    }

    void write(const std::string& path, std::string_view content) {
        fw::io::write_file(path, content);
        manifest_.outputs[path] = fw::sha256_hex(content);
    }

    void finish(const std::string& primary_out) {
        auto elapsed = std::chrono::steady_clock::now() - start_;
        manifest_.wall_clock_ms =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
        manifest_.save(primary_out + ".manifest.json");
    }

private:
    fw::ExperimentManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

// Runners take a parameter object so that `replay` re-dispatches a recorded
// manifest through exactly the same code path.

json run_walk_drift(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto est = fw::drift_estimate(m, p.at("steps").get<int>(), p.at("trials").get<int>(),
                                  p.at("seed").get<std::uint64_t>(), p.value("parallel", 1));
    json result = fw::io::drift_to_json(est, p.at("seed").get<std::uint64_t>());
    if (p.contains("out")) {
        RunRecorder rec("walk drift", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_walk_sample(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto path = fw::sample_path(m, p.at("steps").get<int>(), p.at("seed").get<std::uint64_t>(),
                                p.value("trial", 0));
    const auto& alpha = m.alphabet();
    json incs = json::array();
    for (const fw::Word& g : path.increments) incs.push_back(g.str(alpha));
    json result{{"seed", path.seed},
                {"steps", path.steps()},
                {"increments", incs},
                {"lengths", path.lengths},
                {"final", path.final_position.str(alpha)},
                {"escaped", fw::escape_check(path)},
                {"escape_note", "heuristic surrogate: min length over the last tenth "
                                "exceeds the max over the first tenth"}};
    if (p.contains("out")) {
        RunRecorder rec("walk sample", p, path.seed);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_boundary_hitting(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto cm = fw::empirical_cylinder_measure(
        m, p.at("depth").get<int>(), p.at("trials").get<long long>(), p.at("steps").get<int>(),
        p.at("seed").get<std::uint64_t>(), p.value("horizon", 0.5), p.value("parallel", 1));
    json summary{{"depth", cm.depth},
                 {"trials", cm.trials},
                 {"failures", cm.failures},
                 {"deficit", cm.deficit()},
                 {"cylinders", cm.masses.size()}};
    if (p.contains("out")) {
        RunRecorder rec("boundary hitting", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), fw::io::cylinder_to_csv(cm, m.alphabet()));
        rec.finish(p.at("out"));
    }
    return summary;
}

json run_boundary_tv(const json& p) {
    int rank = p.value("rank", 2);
    auto a = fw::io::cylinder_from_csv(fw::io::read_file(p.at("a")), rank);
    auto b = fw::io::cylinder_from_csv(fw::io::read_file(p.at("b")), rank);
    double tv = fw::tv_distance(a, b);
    json result{{"tv_lower_bound", tv},
                {"depth", a.depth},
                {"deficit_a", a.deficit()},
                {"deficit_b", b.deficit()}};
    if (p.contains("out")) {
        RunRecorder rec("boundary tv", p, 0);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_boundary_stationarity(const json& p) {
    int rank = p.value("rank", 2);
    json result;
    if (p.value("analytic", false)) {
        auto m = fw::io::load_measure<fw::Rational>(p.at("measure"), rank);
        auto cm = fw::nearest_neighbor_harmonic_measure(fw::Alphabet(rank), p.at("depth").get<int>());
        auto res = fw::stationarity_residual(m, cm);
        result = json{{"mode", "exact"},
                      {"residual", fw::to_double(res.residual)},
                      {"residual_exact", fw::format_rational(res.residual)},
                      {"redistributed_mass", fw::to_double(res.redistributed_mass)}};
    } else {
        auto m = fw::io::load_measure<double>(p.at("measure"), rank);
        fw::validate(m);
        auto cm = fw::empirical_cylinder_measure(
            m, p.at("depth").get<int>(), p.at("trials").get<long long>(), p.at("steps").get<int>(),
            p.at("seed").get<std::uint64_t>(), p.value("horizon", 0.5), p.value("parallel", 1));
        auto res = fw::stationarity_residual(m, cm);
        result = json{{"mode", "empirical"},
                      {"residual", res.residual},
                      {"redistributed_mass", res.redistributed_mass},
                      {"trials", cm.trials},
                      {"failures", cm.failures}};
    }
    if (p.contains("out")) {
        RunRecorder rec("boundary stationarity", p, p.value("seed", 0));
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_boundary_atoms(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    std::vector<int> depths;
    for (auto& d : p.at("depths")) depths.push_back(d.get<int>());
    auto cms = fw::empirical_cylinder_measures(
        m, depths, p.at("trials").get<long long>(), p.at("steps").get<int>(),
        p.at("seed").get<std::uint64_t>(), p.value("horizon", 0.5), p.value("parallel", 1));
    auto diag = fw::atom_diagnostic(cms, p.value("threshold", 0.2));
    json rows = json::array();
    for (auto& r : diag.rows)
        rows.push_back(json{{"depth", r.depth},
                            {"max_mass", r.max_mass},
                            {"heaviest", r.heaviest.str(m.alphabet())}});
    json result{{"rows", rows},
                {"threshold", diag.threshold},
                {"atom_suspected", diag.atom_suspected}};
    if (p.contains("out")) {
        RunRecorder rec("boundary atoms", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_subgroup_fold(const json& p) {
    auto g = fw::io::load_subgroup(p.at("gens"), p.value("rank", 2));
    json result = fw::io::graph_to_json(g);
    result["index"] = g.index() ? json(*g.index()) : json("infinite");
    if (p.contains("out")) {
        RunRecorder rec("subgroup fold", p, 0);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_subgroup_commensurable(const json& p) {
    int rank = p.value("rank", 2);
    auto g1 = fw::io::load_subgroup(p.at("a"), rank);
    auto g2 = fw::io::load_subgroup(p.at("b"), rank);
    auto rep = fw::StallingsGraph::commensurable(g1, g2);
    json result{{"verdict", rep.commensurable},
                {"index_in_1", rep.index_in_1 ? json(*rep.index_in_1) : json("infinite")},
                {"index_in_2", rep.index_in_2 ? json(*rep.index_in_2) : json("infinite")}};
    if (p.contains("out")) {
        RunRecorder rec("subgroup commensurable", p, 0);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json track_common(const json& p, const std::string& which) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto radii = parse_int_list(p.at("radii"));
    long long trials = p.value("trials", 1LL);
    std::uint64_t seed = p.at("seed").get<std::uint64_t>();
    std::ostringstream csv;
    csv << fw::io::tracking_csv_header();
    long long context_failures = 0;
    std::optional<fw::StallingsGraph> h2;
    if (which == "lemma52") h2 = fw::io::load_subgroup(p.at("subgroup"), p.value("rank", 2));
    for (long long t = 0; t < trials; ++t) {
        try {
            std::vector<fw::TrackingReport> reports;
            if (which == "thm3") {
                reports = fw::walk_near_ray_fractions(
                    m, p.at("steps").get<int>(), seed, static_cast<std::uint64_t>(t),
                    p.value("germ_depth", 8), radii, p.value("horizon", 0.5),
                    p.value("backward_steps", 2000));
            } else if (which == "thm4") {
                reports = fw::ray_near_walk_fractions(
                    m, p.at("steps").get<int>(), seed, static_cast<std::uint64_t>(t),
                    p.value("germ_depth", 8), p.at("T").get<long long>(), radii,
                    p.value("horizon", 0.5), p.value("backward_steps", 2000));
            } else {
                fw::SchreierBall ball(*h2, p.value("budget", 1000000LL));
                reports = fw::orbit_proximity_fractions(m, p.at("steps").get<int>(), seed,
                                                        static_cast<std::uint64_t>(t), ball, radii);
            }
            fw::io::tracking_to_csv(csv, t, reports);
        } catch (const fw::ResolutionError&) {
            ++context_failures; // germ extraction failed for this trial
        }
    }
    json summary{{"trials", trials}, {"context_failures", context_failures}};
    if (p.contains("out")) {
        RunRecorder rec("track " + which, p, seed);
        rec.write(p.at("out"), csv.str());
        rec.finish(p.at("out"));
    }
    return summary;
}

json run_coset_cesaro(const json& p) {
    auto m = fw::io::load_measure<fw::Rational>(p.at("measure"), p.value("rank", 2));
    auto h2 = fw::io::load_subgroup(p.at("subgroup"), p.value("rank", 2));
    fw::Rational tol = fw::parse_rational(p.value("tolerance", std::string("1/1000")));
    auto cm = fw::cesaro_coset_measure(m, h2, p.at("N").get<long long>(),
                                       p.at("radius").get<int>(), p.value("budget", 200000LL),
                                       tol, p.value("allow_truncation", true));
    json result = fw::io::coset_measure_to_json(cm, m.alphabet());
    if (p.contains("out")) {
        RunRecorder rec("coset cesaro", p, 0);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_quotient_induce(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto pi = fw::AbelianProjection::parse(p.at("proj").get<std::string>(), m.alphabet());
    auto samples = fw::induced_samples(m, pi, p.at("trials").get<long long>(),
                                       p.at("cap").get<long long>(),
                                       p.at("seed").get<std::uint64_t>(), p.value("parallel", 1));
    auto rep = fw::induced_measure_report(samples, pi);
    json freqs = json::object();
    for (auto& [w, f] : rep.frequencies) freqs[w.str(m.alphabet())] = f;
    json result{{"measure", freqs},
                {"trials", samples.trials},
                {"capped", samples.capped},
                {"cap", samples.cap},
                {"cap_rate", rep.cap_rate},
                {"symmetry_tv", rep.symmetry_tv},
                {"head_symmetry_tv", rep.head_symmetry_tv},
                {"kernel_verified", rep.kernel_verified}};
    if (p.contains("out")) {
        RunRecorder rec("quotient induce", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), result.dump(2) + "\n");
        if (p.contains("taus_out")) {
            std::ostringstream taus;
            taus << "tau,capped\r\n";
            for (std::size_t i = 0; i < samples.taus.size(); ++i)
                taus << samples.taus[i] << "," << static_cast<int>(samples.was_capped[i]) << "\r\n";
            rec.write(p.at("taus_out"), taus.str());
        }
        rec.finish(p.at("out"));
    }
    return result;
}

fw::InducedSamples read_taus_csv(const std::string& path) {
    fw::InducedSamples samples;
    std::istringstream lines(fw::io::read_file(path));
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("tau,", 0) == 0) continue;
        }
        auto comma = line.find(',');
        long long tau = std::stoll(line.substr(0, comma));
        int capped = comma == std::string::npos ? 0 : std::stoi(line.substr(comma + 1));
        samples.taus.push_back(tau);
        samples.was_capped.push_back(static_cast<std::uint8_t>(capped));
        samples.capped += capped;
        ++samples.trials;
        samples.cap = std::max(samples.cap, tau);
    }
    if (samples.trials == 0) throw fw::InputError("no stopping times in '" + path + "'");
    return samples;
}

json run_quotient_tail(const json& p) {
    auto samples = read_taus_csv(p.at("in"));
    auto fit = fw::tau_tail_fit(samples, p.value("window_lo", 100LL), p.value("window_hi", 1000LL));
    json result{{"slope", fit.slope},
                {"stderr", fit.stderr_},
                {"points", fit.points},
                {"window", {fit.window_lo, fit.window_hi}},
                {"samples", samples.trials}};
    if (p.contains("out")) {
        RunRecorder rec("quotient tail", p, 0);
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_quotient_moments(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto pi = fw::AbelianProjection::parse(p.at("proj").get<std::string>(), m.alphabet());
    auto samples = fw::induced_samples(m, pi, p.at("trials").get<long long>(),
                                       p.at("cap").get<long long>(),
                                       p.at("seed").get<std::uint64_t>(), p.value("parallel", 1));
    std::vector<double> grid;
    {
        std::string spec = p.at("p");
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            std::size_t end = spec.find(',', pos);
            if (end == std::string::npos) end = spec.size();
            if (end > pos) grid.push_back(std::stod(spec.substr(pos, end - pos)));
            pos = end + 1;
        }
    }
    auto rows = fw::induced_moment_scan(samples, grid);
    json jr = json::array();
    for (auto& r : rows)
        jr.push_back(json{{"p", r.p},
                          {"final_average", r.final_average},
                          {"last_decade_rel_change", r.last_decade_rel_change},
                          {"stabilized", r.stabilized}});
    json result{{"rows", jr}, {"trials", samples.trials}, {"capped", samples.capped}};
    if (p.contains("out")) {
        RunRecorder rec("quotient moments", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json run_quotient_stationarity(const json& p) {
    auto m = fw::io::load_measure<double>(p.at("measure"), p.value("rank", 2));
    fw::validate(m);
    auto pi = fw::AbelianProjection::parse(p.at("proj").get<std::string>(), m.alphabet());
    std::optional<fw::Word> control;
    if (p.contains("control_shift"))
        control = fw::Word::parse(p.at("control_shift").get<std::string>(), m.alphabet());
    auto rep = fw::induced_stationarity_check(
        m, pi, p.at("depth").get<int>(), p.at("trials").get<long long>(),
        p.at("steps").get<int>(), p.at("cap").get<long long>(), p.at("seed").get<std::uint64_t>(),
        p.value("horizon", 0.5), p.value("parallel", 1), control);
    json result{{"residual", rep.residual},
                {"trials", rep.trials},
                {"failures", rep.failures},
                {"cap_rate", rep.cap_rate},
                {"control", control ? p.at("control_shift") : json(nullptr)}};
    if (p.contains("out")) {
        RunRecorder rec("quotient stationarity", p, p.at("seed").get<std::uint64_t>());
        rec.write(p.at("out"), result.dump(2) + "\n");
        rec.finish(p.at("out"));
    }
    return result;
}

json dispatch(const std::string& command, const json& params) {
    if (command == "walk drift") return run_walk_drift(params);
    if (command == "walk sample") return run_walk_sample(params);
    if (command == "boundary hitting") return run_boundary_hitting(params);
    if (command == "boundary tv") return run_boundary_tv(params);
    if (command == "boundary stationarity") return run_boundary_stationarity(params);
    if (command == "boundary atoms") return run_boundary_atoms(params);
    if (command == "subgroup fold") return run_subgroup_fold(params);
    if (command == "subgroup commensurable") return run_subgroup_commensurable(params);
    if (command == "track thm3") return track_common(params, "thm3");
    if (command == "track thm4") return track_common(params, "thm4");
    if (command == "track lemma52") return track_common(params, "lemma52");
    if (command == "coset cesaro") return run_coset_cesaro(params);
    if (command == "quotient induce") return run_quotient_induce(params);
    if (command == "quotient tail") return run_quotient_tail(params);
    if (command == "quotient moments") return run_quotient_moments(params);
    if (command == "quotient stationarity") return run_quotient_stationarity(params);
    throw fw::InputError("manifest names unknown command '" + command + "'");
}

json run_replay(const json& p) {
    auto manifest = fw::ExperimentManifest::load(p.at("manifest"));
    json params = manifest.params;
    bool derived = false;
    if (p.contains("seed")) {
        params["seed"] = p.at("seed").get<std::uint64_t>();
        derived = true;
    }
    // Redirect every recorded output into a scratch directory so the replay
    // never clobbers the originals.
    auto scratch = std::filesystem::temp_directory_path() /
                   ("freewalk-replay-" + std::to_string(::getpid()));
    std::filesystem::create_directories(scratch);
    std::map<std::string, std::string> redirect; // original -> replayed
    for (const char* key : {"out", "taus_out"}) {
        if (params.contains(key)) {
            std::string orig = params[key];
            std::string moved = (scratch / std::filesystem::path(orig).filename()).string();
            params[key] = moved;
            redirect[orig] = moved;
        }
    }
    dispatch(manifest.command, params);

    json files = json::object();
    bool all_match = true;
    for (auto& [orig, digest] : manifest.outputs) {
        auto it = redirect.find(orig);
        std::string replayed = it != redirect.end() ? it->second : orig;
        std::string actual = fw::sha256_file(replayed);
        bool match = actual == digest;
        all_match = all_match && match;
        files[orig] = json{{"expected", digest}, {"actual", actual}, {"match", match}};
    }
    return json{{"command", manifest.command},
                {"derived_run", derived},
                {"match", all_match},
                {"outputs", files}};
}

struct CommonFlags {
    std::string measure;
    std::uint64_t seed = 0;
    int parallel = 1;
    int rank = 2;
};

void add_common(CLI::App* cmd, CommonFlags& c, bool needs_measure = true) {
    if (needs_measure)
        cmd->add_option("--measure", c.measure,
                        "preset (nn-uniform | lazy-nn | squares) or JSON measure file")
            ->required();
    cmd->add_option("--seed", c.seed, "root seed; all streams derive from it");
    cmd->add_option("--parallel", c.parallel, "trial-level worker threads")
        ->check(CLI::Range(1, 256));
    cmd->add_option("--rank", c.rank, "free group rank k")->check(CLI::Range(1, 26));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"random walks on free groups: boundary measures, subgroup algebra, "
                 "tracking statistics, induced kernel measures"};
    app.set_version_flag("--version", std::string(fw::kVersion));
    app.set_config("--config", "", "TOML-style config file; command-line flags win");
    app.require_subcommand(1);

    json params;
    std::string command;

    // walk -------------------------------------------------------------------
    auto* walk = app.add_subcommand("walk", "sampling and drift estimation");
    walk->require_subcommand(1);
    {
        auto c = std::make_shared<CommonFlags>();
        auto steps = std::make_shared<int>(10000);
        auto trials = std::make_shared<int>(100);
        auto out = std::make_shared<std::string>();
        auto* drift = walk->add_subcommand("drift", "Monte Carlo linear drift estimate");
        add_common(drift, *c);
        drift->add_option("--steps", *steps);
        drift->add_option("--trials", *trials);
        drift->add_option("--out", *out, "JSON output path");
        drift->callback([&, c, steps, trials, out] {
            command = "walk drift";
            params = {{"measure", c->measure}, {"steps", *steps},        {"trials", *trials},
                      {"seed", c->seed},       {"parallel", c->parallel}, {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto c = std::make_shared<CommonFlags>();
        auto steps = std::make_shared<int>(1000);
        auto trial = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>();
        auto* sample = walk->add_subcommand("sample", "one seeded path realization");
        add_common(sample, *c);
        sample->add_option("--steps", *steps);
        sample->add_option("--trial", *trial, "trial index within the seed");
        sample->add_option("--out", *out, "JSON output path");
        sample->callback([&, c, steps, trial, out] {
            command = "walk sample";
            params = {{"measure", c->measure}, {"steps", *steps}, {"trial", *trial},
                      {"seed", c->seed},       {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }

    // boundary ------------------------------------------------------------------
    auto* boundary =
        app.add_subcommand("boundary", "hitting-measure estimation on the tree boundary");
    boundary->require_subcommand(1);
    {
        auto c = std::make_shared<CommonFlags>();
        auto depth = std::make_shared<int>(3);
        auto steps = std::make_shared<int>(2000);
        auto trials = std::make_shared<long long>(100000);
        auto horizon = std::make_shared<double>(0.5);
        auto out = std::make_shared<std::string>();
        auto* hitting = boundary->add_subcommand("hitting", "empirical cylinder measure");
        add_common(hitting, *c);
        hitting->add_option("--depth", *depth)->check(CLI::PositiveNumber);
        hitting->add_option("--trials", *trials);
        hitting->add_option("--steps", *steps);
        hitting->add_option("--horizon", *horizon, "confirmation fraction of the walk");
        hitting->add_option("--out", *out, "CSV output path (word,mass,stderr)");
        hitting->callback([&, c, depth, steps, trials, horizon, out] {
            command = "boundary hitting";
            params = {{"measure", c->measure}, {"depth", *depth},    {"trials", *trials},
                      {"steps", *steps},       {"seed", c->seed},    {"horizon", *horizon},
                      {"parallel", c->parallel}, {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto file_a = std::make_shared<std::string>();
        auto file_b = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto rank = std::make_shared<int>(2);
        auto* tv = boundary->add_subcommand(
            "tv", "total-variation lower bound between cylinder CSVs");
        tv->add_option("--a", *file_a)->required();
        tv->add_option("--b", *file_b)->required();
        tv->add_option("--rank", *rank);
        tv->add_option("--out", *out);
        tv->callback([&, file_a, file_b, rank, out] {
            command = "boundary tv";
            params = {{"a", *file_a}, {"b", *file_b}, {"rank", *rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto c = std::make_shared<CommonFlags>();
        auto depth = std::make_shared<int>(3);
        auto steps = std::make_shared<int>(2000);
        auto trials = std::make_shared<long long>(100000);
        auto analytic = std::make_shared<bool>(false);
        auto out = std::make_shared<std::string>();
        auto* stat = boundary->add_subcommand(
            "stationarity", "total-variation residual of the one-step invariance");
        add_common(stat, *c);
        stat->add_option("--depth", *depth);
        stat->add_option("--trials", *trials);
        stat->add_option("--steps", *steps);
        stat->add_flag("--analytic", *analytic,
                       "use the exact uniform cylinder measure instead of sampling");
        stat->add_option("--out", *out);
        stat->callback([&, c, depth, steps, trials, analytic, out] {
            command = "boundary stationarity";
            params = {{"measure", c->measure}, {"depth", *depth}, {"trials", *trials},
                      {"steps", *steps},       {"seed", c->seed}, {"parallel", c->parallel},
                      {"rank", c->rank},       {"analytic", *analytic}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto c = std::make_shared<CommonFlags>();
        auto depths = std::make_shared<std::string>("1,2,3");
        auto steps = std::make_shared<int>(2000);
        auto trials = std::make_shared<long long>(100000);
        auto threshold = std::make_shared<double>(0.2);
        auto out = std::make_shared<std::string>();
        auto* atoms = boundary->add_subcommand("atoms", "max cylinder mass across depths");
        add_common(atoms, *c);
        atoms->add_option("--depths", *depths, "comma-separated increasing depths");
        atoms->add_option("--trials", *trials);
        atoms->add_option("--steps", *steps);
        atoms->add_option("--threshold", *threshold);
        atoms->add_option("--out", *out);
        atoms->callback([&, c, depths, steps, trials, threshold, out] {
            command = "boundary atoms";
            json jd = json::array();
            for (int d : parse_int_list(*depths)) jd.push_back(d);
            params = {{"measure", c->measure}, {"depths", jd},    {"trials", *trials},
                      {"steps", *steps},       {"seed", c->seed}, {"threshold", *threshold},
                      {"parallel", c->parallel}, {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }

    // subgroup -------------------------------------------------------------------
    auto* subgroup = app.add_subcommand("subgroup", "Stallings-graph subgroup algebra");
    subgroup->require_subcommand(1);
    {
        auto gens = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto rank = std::make_shared<int>(2);
        auto* fold = subgroup->add_subcommand("fold", "fold generators into a core graph");
        fold->add_option("--gens", *gens, "inline \"aa,bb\" or a file")->required();
        fold->add_option("--rank", *rank);
        fold->add_option("--out", *out);
        fold->callback([&, gens, rank, out] {
            command = "subgroup fold";
            params = {{"gens", *gens}, {"rank", *rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto a = std::make_shared<std::string>();
        auto b = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto rank = std::make_shared<int>(2);
        auto* comm = subgroup->add_subcommand("commensurable",
                                              "decide commensurability with relative indices");
        comm->add_option("--a", *a, "generators, graph JSON, or generator file")->required();
        comm->add_option("--b", *b, "generators, graph JSON, or generator file")->required();
        comm->add_option("--rank", *rank);
        comm->add_option("--out", *out);
        comm->callback([&, a, b, rank, out] {
            command = "subgroup commensurable";
            params = {{"a", *a}, {"b", *b}, {"rank", *rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }

    // track ------------------------------------------------------------------------
    auto* track = app.add_subcommand("track", "occupation statistics along rays and orbits");
    track->require_subcommand(1);
    auto add_track = [&](const char* name, const char* help, bool wants_T, bool wants_subgroup) {
        auto c = std::make_shared<CommonFlags>();
        auto steps = std::make_shared<int>(100000);
        auto germ_depth = std::make_shared<int>(20);
        auto radii = std::make_shared<std::string>("0,2,4,...,20");
        auto trials = std::make_shared<long long>(1);
        auto horizon = std::make_shared<double>(0.5);
        auto backward = std::make_shared<int>(2000);
        auto T = std::make_shared<long long>(10000);
        auto sub = std::make_shared<std::string>();
        auto budget = std::make_shared<long long>(1000000);
        auto out = std::make_shared<std::string>();
        auto* cmd = track->add_subcommand(name, help);
        add_common(cmd, *c);
        cmd->add_option("--steps", *steps);
        cmd->add_option("--radii", *radii, "list or progression like 0,2,4,...,20");
        cmd->add_option("--trials", *trials);
        cmd->add_option("--out", *out);
        if (!wants_subgroup) {
            cmd->add_option("--germ-depth", *germ_depth, "minimum confirmed germ depth");
            cmd->add_option("--horizon", *horizon);
            cmd->add_option("--backward-steps", *backward);
        }
        if (wants_T) cmd->add_option("--T", *T, "ray vertices to cover");
        if (wants_subgroup) {
            cmd->add_option("--subgroup", *sub, "the orbit's subgroup")->required();
            cmd->add_option("--budget", *budget, "Schreier vertex budget");
        }
        std::string cmd_name = std::string("track ") + name;
        cmd->callback([&command, &params, cmd_name, c, steps, germ_depth, radii, trials, horizon,
                       backward, T, sub, budget, out, wants_T, wants_subgroup] {
            command = cmd_name;
            params = {{"measure", c->measure}, {"steps", *steps}, {"radii", *radii},
                      {"trials", *trials},     {"seed", c->seed}, {"rank", c->rank}};
            if (!wants_subgroup) {
                params["germ_depth"] = *germ_depth;
                params["horizon"] = *horizon;
                params["backward_steps"] = *backward;
            }
            if (wants_T) params["T"] = *T;
            if (wants_subgroup) {
                params["subgroup"] = *sub;
                params["budget"] = *budget;
            }
            if (!out->empty()) params["out"] = *out;
        });
    };
    add_track("thm3", "fraction of walk steps within R of the limit ray", false, false);
    add_track("thm4", "fraction of ray vertices within R of the walk", true, false);
    add_track("lemma52", "fraction of walk steps within R of a subgroup orbit", false, true);

    // coset --------------------------------------------------------------------------
    auto* coset = app.add_subcommand("coset", "measures on coset spaces");
    coset->require_subcommand(1);
    {
        auto measure = std::make_shared<std::string>();
        auto sub = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto tolerance = std::make_shared<std::string>("1/1000");
        auto N = std::make_shared<long long>(1000);
        auto budget = std::make_shared<long long>(200000);
        auto radius = std::make_shared<int>(30);
        auto rank = std::make_shared<int>(2);
        auto strict = std::make_shared<bool>(false);
        auto* ces =
            coset->add_subcommand("cesaro", "exact Cesaro average of coset distributions");
        ces->add_option("--measure", *measure)->required();
        ces->add_option("--subgroup", *sub)->required();
        ces->add_option("--N", *N, "Cesaro horizon");
        ces->add_option("--radius", *radius, "window radius in the Schreier graph");
        ces->add_option("--budget", *budget, "vertex budget for the lazy coset graph");
        ces->add_option("--tolerance", *tolerance, "finite-support tolerance (rational)");
        ces->add_flag("--strict-budget", *strict,
                      "error out instead of truncating at the budget");
        ces->add_option("--rank", *rank);
        ces->add_option("--out", *out);
        ces->callback([&, measure, sub, out, tolerance, N, budget, radius, rank, strict] {
            command = "coset cesaro";
            params = {{"measure", *measure}, {"subgroup", *sub},   {"N", *N},
                      {"radius", *radius},   {"budget", *budget},  {"tolerance", *tolerance},
                      {"allow_truncation", !*strict}, {"rank", *rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }

    // quotient ---------------------------------------------------------------------
    auto* quotient = app.add_subcommand("quotient", "stopping times on abelian quotients");
    quotient->require_subcommand(1);
    {
        auto c = std::make_shared<CommonFlags>();
        auto proj = std::make_shared<std::string>("a:1,b:0");
        auto out = std::make_shared<std::string>();
        auto taus_out = std::make_shared<std::string>();
        auto trials = std::make_shared<long long>(100000);
        auto cap = std::make_shared<long long>(100000);
        auto* induce = quotient->add_subcommand("induce", "induced measure on the kernel");
        add_common(induce, *c);
        induce->add_option("--proj", *proj, "projection, e.g. a:1,b:0 or a:1 0,b:0 1");
        induce->add_option("--trials", *trials);
        induce->add_option("--cap", *cap);
        induce->add_option("--out", *out);
        induce->add_option("--taus-out", *taus_out, "CSV of stopping times");
        induce->callback([&, c, proj, out, taus_out, trials, cap] {
            command = "quotient induce";
            params = {{"measure", c->measure}, {"proj", *proj},   {"trials", *trials},
                      {"cap", *cap},           {"seed", c->seed}, {"parallel", c->parallel},
                      {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
            if (!taus_out->empty()) params["taus_out"] = *taus_out;
        });
    }
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto lo = std::make_shared<long long>(100);
        auto hi = std::make_shared<long long>(1000);
        auto* tail = quotient->add_subcommand("tail", "log-log tail fit of stopping times");
        tail->add_option("--in", *in, "taus.csv from quotient induce")->required();
        tail->add_option("--window-lo", *lo);
        tail->add_option("--window-hi", *hi);
        tail->add_option("--out", *out);
        tail->callback([&, in, out, lo, hi] {
            command = "quotient tail";
            params = {{"in", *in}, {"window_lo", *lo}, {"window_hi", *hi}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto c = std::make_shared<CommonFlags>();
        auto proj = std::make_shared<std::string>("a:1,b:0");
        auto pgrid = std::make_shared<std::string>("0,0.25,0.5,1");
        auto out = std::make_shared<std::string>();
        auto trials = std::make_shared<long long>(100000);
        auto cap = std::make_shared<long long>(100000);
        auto* mom = quotient->add_subcommand("moments", "running p-th moment averages of |xi|");
        add_common(mom, *c);
        mom->add_option("--proj", *proj);
        mom->add_option("--trials", *trials);
        mom->add_option("--cap", *cap);
        mom->add_option("--p", *pgrid, "comma-separated exponents");
        mom->add_option("--out", *out);
        mom->callback([&, c, proj, pgrid, out, trials, cap] {
            command = "quotient moments";
            params = {{"measure", c->measure}, {"proj", *proj},   {"trials", *trials},
                      {"cap", *cap},           {"seed", c->seed}, {"p", *pgrid},
                      {"parallel", c->parallel}, {"rank", c->rank}};
            if (!out->empty()) params["out"] = *out;
        });
    }
    {
        auto c = std::make_shared<CommonFlags>();
        auto proj = std::make_shared<std::string>("a:1,b:0");
        auto control = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto depth = std::make_shared<int>(2);
        auto steps = std::make_shared<int>(2000);
        auto trials = std::make_shared<long long>(100000);
        auto cap = std::make_shared<long long>(100000);
        auto* stat = quotient->add_subcommand(
            "stationarity", "boundary law against its stopped-shift pushforward");
        add_common(stat, *c);
        stat->add_option("--proj", *proj);
        stat->add_option("--depth", *depth);
        stat->add_option("--trials", *trials);
        stat->add_option("--steps", *steps);
        stat->add_option("--cap", *cap);
        stat->add_option("--control-shift", *control,
                         "fixed word to prepend instead of the stopped excursion");
        stat->add_option("--out", *out);
        stat->callback([&, c, proj, control, out, depth, steps, trials, cap] {
            command = "quotient stationarity";
            params = {{"measure", c->measure}, {"proj", *proj},   {"depth", *depth},
                      {"trials", *trials},     {"steps", *steps}, {"cap", *cap},
                      {"seed", c->seed},       {"parallel", c->parallel}, {"rank", c->rank}};
            if (!control->empty()) params["control_shift"] = *control;
            if (!out->empty()) params["out"] = *out;
        });
    }

    // replay ------------------------------------------------------------------------
    {
        auto manifest_path = std::make_shared<std::string>();
        auto seed_override = std::make_shared<std::uint64_t>(0);
        auto* replay =
            app.add_subcommand("replay", "re-run a manifest and compare output digests");
        replay->add_option("--manifest", *manifest_path)->required();
        auto* seed_opt = replay->add_option("--seed", *seed_override,
                                            "override the recorded seed (marks a derived run)");
        replay->callback([&, manifest_path, seed_override, seed_opt] {
            command = "replay";
            params = {{"manifest", *manifest_path}};
            if (seed_opt->count() > 0) params["seed"] = *seed_override;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::RequiredError& e) {
        app.exit(e);
        // A missing or unknown subcommand is a usage error; a missing
        // required flag is an input error.
        return std::string(e.what()).find("subcommand") != std::string::npos ? 1 : 2;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage error
    }

    try {
        json result = command == "replay" ? run_replay(params) : dispatch(command, params);
        std::cout << result.dump(2) << "\n";
        if (command == "replay" && !result.at("derived_run").get<bool>() &&
            !result.at("match").get<bool>())
            return 2;
        return 0;
    } catch (const fw::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const fw::Error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
