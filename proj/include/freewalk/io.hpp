#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "freewalk/boundary.hpp"
#include "freewalk/cesaro.hpp"
#include "freewalk/errors.hpp"
#include "freewalk/measure.hpp"
#include "freewalk/stallings.hpp"
#include "freewalk/tracking.hpp"
#include "freewalk/walk.hpp"
#include "freewalk/word.hpp"

namespace freewalk::io {

using nlohmann::json;

/// Shortest round-trip decimal form; keeps serialized doubles byte-stable.
inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << content;
}

// --- measures ----------------------------------------------------------------

template <class P>
json measure_to_json(const StepDistribution<P>& m) {
    json obj = json::object();
    for (auto& [w, p] : m.entries()) {
        if constexpr (std::is_same_v<P, Rational>) obj[w.str(m.alphabet())] = format_rational(p);
        else obj[w.str(m.alphabet())] = p;
    }
    return obj;
}

template <class P>
StepDistribution<P> measure_from_json(const json& obj, int rank) {
    Alphabet alpha(rank);
    std::vector<std::pair<Word, P>> entries;
    for (auto& [key, val] : obj.items()) {
        Word w = Word::parse(key, alpha);
        Rational q = val.is_string() ? parse_rational(val.template get<std::string>())
                                     : parse_rational(val.dump());
        if constexpr (std::is_same_v<P, Rational>) entries.emplace_back(w, q);
        else entries.emplace_back(w, to_double(q));
    }
    return StepDistribution<P>(alpha, std::move(entries));
}

/// Resolves a --measure argument: a preset name or a JSON file path.
template <class P>
StepDistribution<P> load_measure(const std::string& spec, int rank) {
    if (spec == "nn-uniform" || spec == "lazy-nn" || spec == "squares")
        return StepDistribution<P>::preset(spec, rank);
    json obj = json::parse(read_file(spec));
    return measure_from_json<P>(obj, rank);
}

// --- subgroup graphs ----------------------------------------------------------

inline json graph_to_json(const StallingsGraph& g) {
    json edges = json::array();
    for (auto& [v, x, w] : g.edge_list())
        edges.push_back(json::array({v, std::string(1, g.alphabet().to_char(x)), w}));
    return json{{"vertices", g.vertex_count()},
                {"base", g.base()},
                {"rank", g.alphabet().rank},
                {"edges", edges}};
}

inline StallingsGraph graph_from_json(const json& obj) {
    Alphabet alpha(obj.value("rank", 2));
    int vertices = obj.at("vertices").get<int>();
    std::vector<std::tuple<int, Letter, int>> edges;
    for (auto& e : obj.at("edges")) {
        std::string letter = e.at(1).get<std::string>();
        if (letter.size() != 1) throw InputError("bad edge letter '" + letter + "'");
        edges.emplace_back(e.at(0).get<int>(), alpha.from_char(letter[0]), e.at(2).get<int>());
    }
    return StallingsGraph::from_edges(alpha, vertices, edges);
}

/// Resolves a --a/--b/--subgroup argument: inline comma-separated generators
/// ("aa,b,abA"), a .json graph file, or a text file with one generator per line.
inline StallingsGraph load_subgroup(const std::string& spec, int rank) {
    Alphabet alpha(rank);
    std::ifstream probe(spec);
    if (probe.good()) {
        std::string content = read_file(spec);
        if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json")
            return graph_from_json(json::parse(content));
        std::vector<Word> gens;
        std::istringstream lines(content);
        std::string line;
        while (std::getline(lines, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) gens.push_back(Word::parse(line, alpha));
        }
        return StallingsGraph::fold(alpha, gens);
    }
    std::vector<Word> gens;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t end = spec.find(',', pos);
        if (end == std::string::npos) end = spec.size();
        std::string item = spec.substr(pos, end - pos);
        if (!item.empty()) gens.push_back(Word::parse(item, alpha));
        pos = end + 1;
    }
    if (gens.empty()) throw InputError("no generators in '" + spec + "'");
    return StallingsGraph::fold(alpha, gens);
}

// --- cylinder measures (CSV, RFC 4180) ----------------------------------------

inline std::string cylinder_to_csv(const CylinderMeasure<double>& cm, const Alphabet& alpha) {
    std::ostringstream out;
    out << "word,mass,stderr\r\n";
    for (auto& [w, p] : cm.masses) {
        double se = cm.trials > 0
                        ? std::sqrt(p * (1.0 - p) / static_cast<double>(cm.trials))
                        : 0.0;
        out << w.str(alpha) << "," << format_double(p) << "," << format_double(se) << "\r\n";
    }
    return out.str();
}

inline CylinderMeasure<double> cylinder_from_csv(const std::string& content, int rank) {
    Alphabet alpha(rank);
    CylinderMeasure<double> cm;
    std::istringstream lines(content);
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("word,", 0) == 0) continue;
        }
        std::istringstream cells(line);
        std::string word_s, mass_s, se_s;
        std::getline(cells, word_s, ',');
        std::getline(cells, mass_s, ',');
        std::getline(cells, se_s, ',');
        Word w = Word::parse(word_s, alpha);
        if (cm.masses.empty()) cm.depth = w.size();
        else if (w.size() != cm.depth)
            throw InputError("cylinder CSV mixes depths " + std::to_string(cm.depth) + " and " +
                             std::to_string(w.size()));
        cm.masses[w] = std::stod(mass_s);
    }
    if (cm.masses.empty()) throw InputError("empty cylinder CSV");
    return cm;
}

// --- tracking reports ----------------------------------------------------------

inline std::string tracking_csv_header() {
    return "trial,radius,horizon,qualifying,failures,fraction\r\n";
}

inline void tracking_to_csv(std::ostringstream& out, long long trial,
                            const std::vector<TrackingReport>& reports) {
    for (const auto& r : reports)
        out << trial << "," << r.radius << "," << r.horizon << "," << r.qualifying << ","
            << r.failures << "," << format_double(r.fraction) << "\r\n";
}

// --- other result types ---------------------------------------------------------

inline json drift_to_json(const DriftEstimate& d, std::uint64_t seed) {
    return json{{"mean", d.mean},
                {"ci", d.ci_halfwidth},
                {"N", d.steps},
                {"trials", d.trials},
                {"seed", seed}};
}

inline json geodesic_to_json(const TreeGeodesic& sigma, const Alphabet& alpha) {
    return json{{"minus_germ", sigma.minus.prefix.str(alpha)},
                {"plus_germ", sigma.plus.prefix.str(alpha)},
                {"pivot", sigma.pivot.str(alpha)}};
}

inline TreeGeodesic geodesic_from_json(const json& j, const Alphabet& alpha) {
    BoundaryPoint minus{Word::parse(j.at("minus_germ").get<std::string>(), alpha),
                        GermSource::estimated};
    BoundaryPoint plus{Word::parse(j.at("plus_germ").get<std::string>(), alpha),
                       GermSource::estimated};
    return geodesic_between(minus, plus);
}

inline json coset_measure_to_json(const CosetMeasure& cm, const Alphabet& alpha) {
    json masses = json::object();
    json mass_rows = json::array();
    for (auto& [state, distance, rep, mass] : cm.masses) {
        masses[rep.str(alpha).empty() ? "<base>" : rep.str(alpha)] = format_rational(mass);
        mass_rows.push_back(json{{"state", state},
                                 {"distance", distance},
                                 {"representative", rep.str(alpha)},
                                 {"mass", format_rational(mass)},
                                 {"mass_double", to_double(mass)}});
    }
    json outside = json::array();
    for (std::size_t r = 0; r < cm.outside_mass.size(); ++r)
        outside.push_back(json{{"radius", r}, {"mass", format_rational(cm.outside_mass[r])}});
    return json{{"cesaro_steps", cm.cesaro_steps},
                {"window_radius", cm.window_radius},
                {"effective_radius", cm.effective_radius},
                {"truncated", cm.truncated},
                {"leaked_mass", format_rational(cm.leaked_mass)},
                {"leaked_mass_double", to_double(cm.leaked_mass)},
                {"masses", masses},
                {"mass_table", mass_rows},
                {"argmax_states", cm.argmax_states},
                {"outside_mass", outside},
                {"finite_support", cm.finite_support},
                {"finite_support_radius", cm.finite_support_radius},
                {"tolerance", format_rational(cm.tolerance)}};
}

} // namespace freewalk::io
