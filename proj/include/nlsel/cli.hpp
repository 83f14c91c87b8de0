#pragma once
// Command-line front end: argument parsing, CSV ingestion, the four
// workflows and their JSON reports.  Needs CLI11.hpp and json.hpp on the
// include path.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlsel/nlsel.hpp"

namespace nlsel::cli {

using json = nlohmann::ordered_json;

enum class Command { Select, Simulate, Prc, CompareSearch };

inline std::string toString(Command c) {
    switch (c) {
    case Command::Select: return "select";
    case Command::Simulate: return "simulate";
    case Command::Prc: return "prc";
    case Command::CompareSearch: return "compare-search";
    }
    return "?";
}

struct RunRequest {
    Command command = Command::Select;
    std::optional<std::string> input;
    std::string response = "y";
    ScorerConfig scorer;
    SearchConfig search;
    SssParams sss; ///< both parameter sets are kept for compare-search
    S5Params s5;
    std::optional<int> qn; ///< unset: min(n - 2, 40) once n is known
    SimDesign design;
    std::vector<int> pGrid; ///< compare-search
    std::vector<double> tauGrid = defaultTauGrid();
    std::vector<double> gGrid = defaultGGrid();
    bool customGrid = false;
    int replicates = 1;
    std::optional<double> testFraction;
    std::optional<std::string> output;
    std::optional<std::string> csvOutput;
    std::uint64_t seed = 1;
};

/// Result of argument parsing: a request, or text to print and an exit code
/// (help / version).
struct Parsed {
    std::optional<RunRequest> request;
    std::string message;
    int exitCode = 0;
};

namespace detail {

template <class T> std::vector<T> parseList(const std::string &flag, const std::string &s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw UsageError(flag + ": empty list element");
        item = item.substr(b, e - b + 1);
        T v{};
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) throw UsageError(flag + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(flag + ": empty list");
    return out;
}

} // namespace detail

/// Parse argv into a fully validated request.  Throws UsageError.
inline Parsed parseArgs(int argc, const char *const *argv) {
    CLI::App app{"Bayesian variable selection with nonlocal priors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "nlsel 0.1.0");

    struct Raw {
        std::string input, response = "y", prior = "pemom", modelPrior = "uniform", algo = "s5", schedule;
        std::string tauGrid, gGrid, pList, output, csvOutput;
        double tau = 0, g = 1, sigma2 = 0, a0 = 0.1, b0 = 0.1, testFraction = 0;
        int r = 1, qn = 0, Mn = 20, J = 20, L = 20, N = 400, threads = 0, kase = 3, n = 400, replicates = 1;
        std::uint64_t seed = 1;
    } raw;

    auto common = [&](CLI::App *sc) {
        sc->add_option("--prior", raw.prior, "coefficient prior")->check(CLI::IsMember({"pemom", "pimom", "gprior", "rlasso"}));
        sc->add_option("--tau", raw.tau, "nonlocal scale (default log n * log p)");
        sc->add_option("--g", raw.g, "g-prior scale (default n)");
        sc->add_option("--r", raw.r, "piMoM order");
        sc->add_option("--model-prior", raw.modelPrior, "model-space prior")->check(CLI::IsMember({"uniform", "betabinomial"}));
        sc->add_option("--qn", raw.qn, "maximum model size (default min(n-2, 40))");
        sc->add_option("--algo", raw.algo, "search algorithm")->check(CLI::IsMember({"s5", "sss"}));
        sc->add_option("--Mn", raw.Mn, "S5 screening size");
        sc->add_option("--J", raw.J, "S5 iterations per temperature");
        sc->add_option("--L", raw.L, "S5 temperature levels");
        sc->add_option("--N", raw.N, "SSS iterations");
        sc->add_option("--schedule", raw.schedule, "S5 temperatures t1,...,tL (strictly decreasing)");
        sc->add_option("--sigma2", raw.sigma2, "known error variance (omit to integrate it out)");
        sc->add_option("--a0", raw.a0, "inverse-gamma shape");
        sc->add_option("--b0", raw.b0, "inverse-gamma scale");
        sc->add_option("--seed", raw.seed, "master seed");
        sc->add_option("--threads", raw.threads, "scoring worker threads (default: available cores)");
        sc->add_option("--output", raw.output, "JSON output path (default stdout)");
    };
    auto bench = [&](CLI::App *sc) {
        sc->add_option("--case", raw.kase, "covariance design: 1 compound symmetry, 2 AR(1), 3 isotropic")->check(CLI::Range(1, 3));
        sc->add_option("--n", raw.n, "observations");
        sc->add_option("--replicates", raw.replicates, "replicate data sets");
    };

    CLI::App *sel = app.add_subcommand("select", "variable selection on a CSV data set");
    common(sel);
    sel->add_option("--input", raw.input, "CSV file with a header row");
    sel->add_option("--response", raw.response, "response column name");
    sel->add_option("--test-fraction", raw.testFraction, "also run random-split MSPE with this test share");
    sel->add_option("--replicates", raw.replicates, "MSPE splits");

    CLI::App *sim = app.add_subcommand("simulate", "generate a synthetic data set and run selection on it");
    common(sim);
    bench(sim);
    sim->add_option("--p", raw.pList, "covariates");
    sim->add_option("--csv-output", raw.csvOutput, "write the generated data as CSV");

    CLI::App *prc = app.add_subcommand("prc", "precision-recall curve over a hyperparameter grid");
    common(prc);
    bench(prc);
    prc->add_option("--p", raw.pList, "covariates");
    prc->add_option("--tau-grid", raw.tauGrid, "tau values (peMoM / piMoM / rlasso)");
    prc->add_option("--g-grid", raw.gGrid, "g values (g-prior)");
    prc->add_option("--csv-output", raw.csvOutput, "write hyper,precision,recall rows as CSV");

    CLI::App *cmp = app.add_subcommand("compare-search", "S5 versus SSS timing and MAP agreement");
    common(cmp);
    bench(cmp);
    cmp->add_option("--p", raw.pList, "comma-separated covariate counts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        return {std::nullopt, app.help(), 0};
    } catch (const CLI::CallForAllHelp &) {
        return {std::nullopt, app.help("", CLI::AppFormatMode::All), 0};
    } catch (const CLI::CallForVersion &) {
        return {std::nullopt, "nlsel 0.1.0\n", 0};
    } catch (const CLI::ParseError &e) {
        throw UsageError(e.what());
    }

    CLI::App *used = app.get_subcommands().front();
    auto given = [&](const char *flag) { return used->count(flag) > 0; };

    RunRequest req;
    if (used == sel) req.command = Command::Select;
    else if (used == sim) req.command = Command::Simulate;
    else if (used == prc) req.command = Command::Prc;
    else req.command = Command::CompareSearch;

    // scorer
    CoefPrior &cp = req.scorer.coefPrior;
    cp.family = raw.prior == "pemom"    ? PriorFamily::PeMoM
                : raw.prior == "pimom"  ? PriorFamily::PiMoM
                : raw.prior == "gprior" ? PriorFamily::GPrior
                                        : PriorFamily::ReducedRlasso;
    if (given("--tau")) {
        if (!(raw.tau > 0)) throw UsageError("--tau must be positive");
        cp.tau = raw.tau;
    }
    if (given("--g") && !(raw.g > 0)) throw UsageError("--g must be positive");
    if (given("--g")) cp.g = raw.g;
    if (raw.r < 1) throw UsageError("--r must be >= 1");
    cp.r = raw.r;
    req.scorer.modelPrior.kind = raw.modelPrior == "betabinomial" ? ModelPriorKind::BetaBinomial : ModelPriorKind::UniformRestricted;
    if (given("--sigma2")) {
        if (!(raw.sigma2 > 0)) throw UsageError("--sigma2 must be positive");
        req.scorer.sigma = KnownVariance{raw.sigma2};
    } else {
        if (!(raw.a0 > 0) || !(raw.b0 > 0)) throw UsageError("--a0 and --b0 must be positive");
        req.scorer.sigma = InverseGammaVariance{raw.a0, raw.b0};
    }

    // search
    if (given("--qn")) {
        if (raw.qn < 0) throw UsageError("--qn must be non-negative");
        req.qn = raw.qn;
    }
    req.sss = SssParams{raw.N, true};
    req.s5 = S5Params{raw.J, raw.L, raw.Mn, {}, ScreenResidual::OLS};
    if (given("--schedule")) req.s5.schedule = detail::parseList<double>("--schedule", raw.schedule);
    if (raw.algo == "sss") req.search.algorithm = req.sss;
    else req.search.algorithm = req.s5;
    req.seed = raw.seed;
    req.search.seed = raw.seed;
    req.search.threads = given("--threads") ? raw.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (req.search.threads < 1) throw UsageError("--threads must be >= 1");
    try {
        validate(SearchConfig{req.search.algorithm, 0, 1, 1});
        if (req.command == Command::CompareSearch) {
            validate(SearchConfig{req.sss, 0, 1, 1});
            validate(SearchConfig{req.s5, 0, 1, 1});
        }
    } catch (const DomainError &e) {
        throw UsageError(e.what());
    }
    if (given("--output")) req.output = raw.output;
    if (used->get_option_no_throw("--csv-output") && given("--csv-output")) req.csvOutput = raw.csvOutput;
    if (raw.replicates < 1) throw UsageError("--replicates must be >= 1");
    req.replicates = raw.replicates;

    if (req.command == Command::Select) {
        if (!given("--input")) throw UsageError("select requires --input");
        req.input = raw.input;
        req.response = raw.response;
        if (given("--test-fraction")) {
            if (!(raw.testFraction > 0 && raw.testFraction <= 0.5)) throw UsageError("--test-fraction must lie in (0, 0.5]");
            req.testFraction = raw.testFraction;
        }
        return {req, "", 0};
    }

    // bench commands
    if (!given("--p")) throw UsageError(toString(req.command) + " requires --p");
    req.pGrid = detail::parseList<int>("--p", raw.pList);
    for (int p : req.pGrid)
        if (p < 1) throw UsageError("--p values must be positive");
    if (req.command != Command::CompareSearch && req.pGrid.size() != 1) throw UsageError("--p takes a single value here");
    if (raw.n < 3) throw UsageError("--n must be >= 3");
    req.design.kase = static_cast<CovarianceCase>(raw.kase);
    req.design.n = raw.n;
    req.design.p = req.pGrid.front();
    req.design.seed = raw.seed;
    const int tmax = *std::max_element(req.design.trueModel.begin(), req.design.trueModel.end());
    for (int p : req.pGrid)
        if (p <= tmax) throw UsageError("--p must exceed the largest true index (" + std::to_string(tmax) + ")");
    if (req.command == Command::Prc) {
        if (cp.family == PriorFamily::GPrior) {
            if (given("--g-grid")) req.gGrid = detail::parseList<double>("--g-grid", raw.gGrid), req.customGrid = true;
        } else if (given("--tau-grid")) {
            req.tauGrid = detail::parseList<double>("--tau-grid", raw.tauGrid);
            req.customGrid = true;
        }
        for (double v : cp.family == PriorFamily::GPrior ? req.gGrid : req.tauGrid)
            if (!(v > 0)) throw UsageError("grid values must be positive");
    }
    return {req, "", 0};
}

// ---------------------------------------------------------------------------
// CSV

struct CsvData {
    Dataset data; ///< standardized
    std::vector<std::string> columns; ///< kept covariate names, index = model index
    std::vector<std::string> dropped;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> splitCsvLine(const std::string &line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
            else if (c == '"') quoted = false;
            else cur += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(cur);
    for (auto &s : cells) {
        const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

} // namespace detail

/// Parse a header-row CSV from a stream.  Lines and columns in ParseError are
/// 1-based.  Constant covariates are dropped with a warning.
inline CsvData parseCsv(std::istream &in, const std::string &response) {
    std::string line;
    std::size_t lineNo = 0;
    auto nextLine = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineNo;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (lineNo == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    };
    if (!nextLine()) throw ParseError(1, 1, "empty file: expected a header row");
    const std::vector<std::string> header = detail::splitCsvLine(line);
    std::set<std::string> seen;
    int yCol = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) throw ParseError(lineNo, c + 1, "empty column name");
        if (!seen.insert(header[c]).second) throw ParseError(lineNo, c + 1, "duplicate column name '" + header[c] + "'");
        if (header[c] == response) yCol = static_cast<int>(c);
    }
    if (yCol < 0) throw ParseError(lineNo, 1, "response column '" + response + "' not found in header");
    if (header.size() < 2) throw ParseError(lineNo, 1, "need at least one covariate column");

    std::vector<std::vector<double>> rows;
    while (nextLine()) {
        const auto cells = detail::splitCsvLine(line);
        if (cells.size() != header.size())
            throw ParseError(lineNo, std::min(cells.size(), header.size()) + 1,
                             "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string &s = cells[c];
            const char *b = s.data(), *e = s.data() + s.size();
            if (b != e && *b == '+') ++b;
            const auto [ptr, ec] = std::from_chars(b, e, row[c]);
            if (s.empty() || ec != std::errc() || ptr != e || !std::isfinite(row[c]))
                throw ParseError(lineNo, c + 1, "non-numeric value '" + s + "' in column '" + header[c] + "'");
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) throw ParseError(lineNo, 1, "need at least three data rows");

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    std::vector<int> keep;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (static_cast<int>(c) != yCol) keep.push_back(static_cast<int>(c)), names.push_back(header[c]);

    CsvData out;
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rows[i][yCol];
    for (;;) {
        MatrixXd X(n, static_cast<Eigen::Index>(keep.size()));
        for (Eigen::Index i = 0; i < n; ++i)
            for (std::size_t j = 0; j < keep.size(); ++j) X(i, j) = rows[i][keep[j]];
        try {
            out.data = standardize(Dataset(y, std::move(X)));
            break;
        } catch (const ConstantColumn &e) {
            out.dropped.push_back(names[e.column()]);
            out.warnings.push_back("dropped constant column '" + names[e.column()] + "'");
            keep.erase(keep.begin() + e.column());
            names.erase(names.begin() + e.column());
            if (keep.empty()) throw ParseError(1, 1, "every covariate column is constant");
        }
    }
    out.columns = std::move(names);
    return out;
}

inline CsvData loadCsv(const std::string &path, const std::string &response) {
    std::ifstream in(path);
    if (!in) throw Error("IOError", "cannot open '" + path + "'");
    return parseCsv(in, response);
}

inline void writeCsv(const std::string &path, const Dataset &raw) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write '" + path + "'");
    char buf[32];
    out << "y";
    for (int j = 0; j < raw.p(); ++j) out << ",x" << j;
    out << "\n";
    for (int i = 0; i < raw.n(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", raw.y[i]);
        out << buf;
        for (int j = 0; j < raw.p(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", raw.X(i, j));
            out << ',' << buf;
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// JSON output

/// Serialise with every float at 17 significant digits; non-finite numbers
/// become null.
inline void writeJson(std::ostream &os, const json &j, int indent = 2, int depth = 0) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' '), padEnd(static_cast<std::size_t>(indent * depth), ' ');
    const char *nl = indent > 0 ? "\n" : "";
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << '{' << nl;
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ',' << nl;
            first = false;
            os << pad << json(it.key()).dump() << (indent > 0 ? ": " : ":");
            writeJson(os, it.value(), indent, depth + 1);
        }
        os << nl << padEnd << '}';
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        // flat arrays of scalars stay on one line
        const bool flat = std::all_of(j.begin(), j.end(), [](const json &e) { return e.is_primitive(); });
        os << '[' << (flat ? "" : nl);
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ',' << (flat ? " " : nl);
            if (!flat) os << pad;
            writeJson(os, j[i], indent, depth + 1);
        }
        os << (flat ? "" : nl) << (flat ? "" : padEnd) << ']';
        return;
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            os << "null";
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        std::string s(buf);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        os << s;
        return;
    }
    default: os << j.dump();
    }
}

inline std::string toJsonString(const json &j, int indent = 2) {
    std::ostringstream os;
    writeJson(os, j, indent);
    return os.str();
}

inline json modelJson(const Model &k) { return json(k.vec()); }

/// Structural check of a report against the published schema.  Returns the
/// list of violations (empty when valid).
inline std::vector<std::string> validateReport(const json &j) {
    std::vector<std::string> errs;
    auto need = [&](const char *key, auto pred, const char *what) {
        if (!j.contains(key)) errs.push_back(std::string("missing key '") + key + "'");
        else if (!pred(j.at(key))) errs.push_back(std::string("key '") + key + "' is not " + what);
    };
    auto isIndexArray = [](const json &v) {
        return v.is_array() && std::all_of(v.begin(), v.end(), [](const json &e) { return e.is_number_integer() && e.get<long long>() >= 0; });
    };
    if (!j.is_object()) return {"report is not an object"};
    need("command", [](const json &v) { return v.is_string() && (v == "select" || v == "simulate" || v == "prc" || v == "compare-search"); }, "a known command");
    need("config", [](const json &v) { return v.is_object(); }, "an object");
    need("map_model", isIndexArray, "an array of non-negative integers");
    need("map_score", [](const json &v) { return v.is_number() || v.is_null(); }, "a number or null");
    need("posterior", [&](const json &v) {
        if (!v.is_array() || v.size() > 50) return false;
        return std::all_of(v.begin(), v.end(), [&](const json &e) {
            return e.is_object() && e.size() == 2 && e.contains("model") && isIndexArray(e["model"]) && e.contains("prob") &&
                   (e["prob"].is_number() && e["prob"].get<double>() >= 0 && e["prob"].get<double>() <= 1 + 1e-12);
        });
    }, "an array of at most 50 {model, prob} entries");
    need("odds_count_0.001", [](const json &v) { return v.is_number_integer() && v.get<long long>() >= 0; }, "a non-negative integer");
    need("metrics", [](const json &v) { return v.is_object(); }, "an object");
    need("timing", [](const json &v) { return v.is_object() && v.contains("wall_seconds") && v["wall_seconds"].is_number() && v["wall_seconds"].get<double>() >= 0; },
         "an object with non-negative wall_seconds");
    need("warnings", [](const json &v) { return v.is_array() && std::all_of(v.begin(), v.end(), [](const json &e) { return e.is_string(); }); }, "an array of strings");
    need("seed", [](const json &v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); }, "a non-negative integer");
    static const std::set<std::string> known{"command", "config", "map_model", "map_score", "posterior", "odds_count_0.001",
                                             "metrics", "timing", "warnings", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) errs.push_back("unexpected key '" + it.key() + "'");
    return errs;
}

// ---------------------------------------------------------------------------
// Workflows

namespace detail {

inline json scorerJson(const ScorerConfig &c, int n, int p) {
    json j;
    j["prior"] = toString(c.coefPrior.family);
    if (c.coefPrior.family == PriorFamily::GPrior) j["g"] = resolveG(c.coefPrior, n), j["g_default"] = !c.coefPrior.g.has_value();
    else j["tau"] = resolveTau(c.coefPrior, n, p), j["tau_default"] = !c.coefPrior.tau.has_value();
    if (c.coefPrior.family == PriorFamily::PiMoM) j["r"] = c.coefPrior.r;
    j["model_prior"] = c.modelPrior.kind == ModelPriorKind::BetaBinomial ? "betabinomial" : "uniform";
    if (auto k = std::get_if<KnownVariance>(&c.sigma)) j["sigma2"] = k->sigma2;
    else {
        const auto &ig = std::get<InverseGammaVariance>(c.sigma);
        j["a0"] = ig.a0, j["b0"] = ig.b0;
    }
    return j;
}

inline json searchJson(const SearchConfig &s) {
    json j;
    if (auto sss = std::get_if<SssParams>(&s.algorithm)) {
        j["algo"] = "sss";
        j["N"] = sss->N;
    } else {
        const auto &p = std::get<S5Params>(s.algorithm);
        j["algo"] = "s5";
        j["J"] = p.J, j["L"] = p.L, j["Mn"] = p.Mn;
        j["schedule"] = resolveSchedule(p);
    }
    j["qn"] = s.qn;
    j["threads"] = s.threads;
    return j;
}

inline json designJson(const SimDesign &d) {
    json j;
    j["case"] = static_cast<int>(d.kase);
    j["n"] = d.n, j["p"] = d.p;
    j["true_model"] = modelJson(d.trueModel);
    j["true_magnitudes"] = d.trueMagnitudes;
    j["sigma"] = d.sigma;
    return j;
}

inline json baseReport(const RunRequest &req) {
    json r;
    r["command"] = toString(req.command);
    r["config"] = json::object();
    r["map_model"] = json::array();
    r["map_score"] = nullptr;
    r["posterior"] = json::array();
    r["odds_count_0.001"] = 0;
    r["metrics"] = json::object();
    r["timing"] = {{"wall_seconds", 0.0}};
    r["warnings"] = json::array();
    r["seed"] = req.seed;
    return r;
}

inline void addPosterior(json &r, const Ledger &ledger) {
    const PosteriorSummary ps = posteriorSummary(ledger);
    r["map_model"] = modelJson(ps.map);
    r["map_score"] = ps.mapScore;
    json post = json::array();
    for (const auto &[m, prob] : ps.top(50)) post.push_back({{"model", modelJson(m)}, {"prob", prob}});
    r["posterior"] = post;
    r["odds_count_0.001"] = ps.oddsCount;
    r["metrics"]["map_prob"] = ps.prob(ps.map);
    r["metrics"]["models_scored"] = ledger.size();
    r["metrics"]["transitions"] = ledger.transitions;
    r["metrics"]["dead_ends"] = ledger.deadEnds;
    for (const auto &w : ledger.warnings) r["warnings"].push_back(w);
}

inline void addTauWarning(json &r, const ScorerConfig &c, int n, int p) {
    if (c.coefPrior.family == PriorFamily::GPrior) return;
    if (auto w = tauGrowthWarning(resolveTau(c.coefPrior, n, p), p)) r["warnings"].push_back(*w);
}

inline int resolveQn(const RunRequest &req, int n) { return req.qn ? *req.qn : std::max(0, std::min(n - 2, 40)); }

} // namespace detail

/// Run the requested workflow and build its report.  Throws library errors.
inline json run(const RunRequest &req) {
    using clock = std::chrono::steady_clock;
    json r = detail::baseReport(req);
    const auto t0 = clock::now();

    switch (req.command) {
    case Command::Select: {
        CsvData csv = loadCsv(*req.input, req.response);
        const Dataset &data = csv.data;
        SearchConfig search = req.search;
        search.qn = detail::resolveQn(req, data.n());
        for (const auto &w : csv.warnings) r["warnings"].push_back(w);
        r["config"] = {{"input", *req.input}, {"response", req.response}, {"n", data.n()}, {"p", data.p()},
                       {"columns", csv.columns}, {"dropped_columns", csv.dropped},
                       {"scorer", detail::scorerJson(req.scorer, data.n(), data.p())}, {"search", detail::searchJson(search)}};
        detail::addTauWarning(r, req.scorer, data.n(), data.p());
        const Ledger ledger = searchLedger(data, req.scorer, search);
        detail::addPosterior(r, ledger);
        json names = json::array();
        for (int j : posteriorSummary(ledger).map) names.push_back(csv.columns[j]);
        r["metrics"]["map_columns"] = names;
        if (req.testFraction) {
            Rng rng(deriveSeed(req.seed, 0x6d737065ULL));
            const MspeResult m = mspeEvaluate(data, req.scorer, search, *req.testFraction, req.replicates, rng);
            r["metrics"]["mspe"] = {{"test_fraction", *req.testFraction}, {"replicates", req.replicates}, {"mean", m.meanMSPE},
                                    {"sd", m.sd}, {"degenerate", m.degenerate}, {"avg_model_size", m.avgModelSize},
                                    {"frequently_selected", m.frequentlySelected}, {"ever_selected_count", m.everSelected.size()},
                                    {"per_replicate", m.perReplicate}};
        }
        break;
    }
    case Command::Simulate: {
        const Simulated sim = simulate(req.design);
        SearchConfig search = req.search;
        search.qn = detail::resolveQn(req, req.design.n);
        r["config"] = {{"design", detail::designJson(req.design)},
                       {"scorer", detail::scorerJson(req.scorer, req.design.n, req.design.p)},
                       {"search", detail::searchJson(search)}};
        detail::addTauWarning(r, req.scorer, req.design.n, req.design.p);
        if (req.csvOutput) writeCsv(*req.csvOutput, sim.raw);
        const auto ts = clock::now();
        const Ledger ledger = searchLedger(sim.data, req.scorer, search);
        detail::addPosterior(r, ledger);
        const PosteriorSummary ps = posteriorSummary(ledger);
        const SelectionMetrics sm = selectionMetrics(ps.map, req.design.trueModel);
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(sim.checksum));
        r["metrics"]["checksum"] = hex;
        r["metrics"]["true_beta"] = std::vector<double>(sim.signedBeta.data(), sim.signedBeta.data() + sim.signedBeta.size());
        r["metrics"]["true_model_prob"] = ps.prob(req.design.trueModel);
        r["metrics"]["tp"] = sm.tp, r["metrics"]["fp"] = sm.fp, r["metrics"]["fn"] = sm.fn;
        r["metrics"]["precision"] = sm.precision, r["metrics"]["recall"] = sm.recall;
        r["metrics"]["search_seconds"] = std::chrono::duration<double>(clock::now() - ts).count();
        break;
    }
    case Command::Prc: {
        const bool g = req.scorer.coefPrior.family == PriorFamily::GPrior;
        const std::vector<double> &grid = g ? req.gGrid : req.tauGrid;
        SearchConfig search = req.search;
        search.qn = detail::resolveQn(req, req.design.n);
        json scorer = detail::scorerJson(req.scorer, req.design.n, req.design.p);
        scorer.erase(g ? "g" : "tau");
        scorer.erase("tau_default");
        scorer.erase("g_default");
        r["config"] = {{"design", detail::designJson(req.design)}, {"scorer", scorer}, {"search", detail::searchJson(search)},
                       {"replicates", req.replicates}, {"grid_name", g ? "g" : "tau"}, {"grid", grid},
                       {"grid_is_default", !req.customGrid}};
        if (!g) {
            int weak = 0;
            for (double t : grid) weak += tauGrowthWarning(t, req.design.p).has_value();
            if (weak)
                r["warnings"].push_back(std::to_string(weak) + " grid value(s) satisfy tau <= log(p) = " +
                                        std::to_string(std::log(static_cast<double>(req.design.p))));
        }
        const PRCurve curve = prCurve(req.design, req.scorer, grid, req.replicates, search);
        json pts = json::array();
        for (const auto &p : curve.points) pts.push_back({{"hyper", p.hyper}, {"precision", p.precision}, {"recall", p.recall}});
        r["metrics"] = {{"points", pts}, {"area", curve.area}, {"degenerate", curve.degenerate},
                        {"failed_replicates", curve.failedReplicates}};
        if (curve.failedReplicates) r["warnings"].push_back(std::to_string(curve.failedReplicates) + " replicate(s) failed");
        if (req.csvOutput) {
            std::ofstream out(*req.csvOutput);
            if (!out) throw DomainError("cannot write '" + *req.csvOutput + "'");
            out << "hyper,precision,recall\n";
            char buf[96];
            for (const auto &p : curve.points) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.hyper, p.precision, p.recall);
                out << buf;
            }
        }
        break;
    }
    case Command::CompareSearch: {
        SearchConfig s5 = req.search, sss = req.search;
        const int qn = detail::resolveQn(req, req.design.n);
        s5.qn = sss.qn = qn;
        s5.algorithm = req.s5;
        sss.algorithm = req.sss;
        r["config"] = {{"design", detail::designJson(req.design)}, {"p_grid", req.pGrid},
                       {"scorer", detail::scorerJson(req.scorer, req.design.n, req.design.p)},
                       {"s5", detail::searchJson(s5)}, {"sss", detail::searchJson(sss)}, {"replicates", req.replicates}};
        r["config"]["scorer"].erase("tau");
        if (!req.scorer.coefPrior.tau) r["config"]["scorer"]["tau"] = "log(n) log(p)";
        else r["config"]["scorer"]["tau"] = *req.scorer.coefPrior.tau;
        const auto rows = compareSearch(req.design, req.pGrid, req.scorer, s5, sss, req.replicates);
        json tab = json::array();
        for (const auto &row : rows)
            tab.push_back({{"p", row.p}, {"algo", row.algo}, {"wall_seconds", row.meanWallSeconds},
                           {"seconds_to_map", row.meanSecondsToMap}, {"models_before_map", row.meanModelsBeforeMap},
                           {"distinct_models", row.meanDistinctModels}, {"map_agreement", row.mapAgreement}});
        r["metrics"] = {{"rows", tab}};
        break;
    }
    }
    r["timing"]["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
    return r;
}

inline json errorReport(const std::string &command, std::uint64_t seed, const std::string &kind, const std::string &message) {
    json r;
    r["command"] = command;
    r["error"] = {{"kind", kind}, {"message", message}};
    r["seed"] = seed;
    return r;
}

inline std::string humanSummary(const json &r) {
    std::ostringstream os;
    os << r["command"].get<std::string>() << ": ";
    if (!r["map_score"].is_null()) {
        os << "MAP " << r["map_model"].dump() << " prob ";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", r["metrics"].value("map_prob", 0.0));
        os << buf << ", ";
    } else if (r["metrics"].contains("area")) {
        os << "PR area " << r["metrics"]["area"].dump() << ", ";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f s", r["timing"]["wall_seconds"].get<double>());
    os << buf;
    return os.str();
}

/// Full CLI entry point.  Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline int main(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    std::optional<RunRequest> req;
    try {
        Parsed parsed = parseArgs(argc, argv);
        if (!parsed.request) {
            out << parsed.message;
            return parsed.exitCode;
        }
        req = std::move(parsed.request);
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << "\n";
        out << toJsonString(errorReport(argc > 1 ? argv[1] : "", 0, e.kind(), e.what())) << "\n";
        return 2;
    }
    auto emit = [&](const json &doc) {
        const std::string text = toJsonString(doc) + "\n";
        if (req->output) {
            std::ofstream f(*req->output);
            if (!f) throw DomainError("cannot write '" + *req->output + "'");
            f << text;
        } else {
            out << text;
        }
    };
    try {
        const json report = run(*req);
        emit(report);
        err << humanSummary(report) << "\n";
        return 0;
    } catch (const Error &e) {
        err << "error (" << e.kind() << "): " << e.what() << "\n";
        try {
            emit(errorReport(toString(req->command), req->seed, e.kind(), e.what()));
        } catch (const std::exception &) {
            out << toJsonString(errorReport(toString(req->command), req->seed, e.kind(), e.what())) << "\n";
        }
        return 1;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        out << toJsonString(errorReport(toString(req->command), req->seed, "Internal", e.what())) << "\n";
        return 1;
    }
}

} // namespace nlsel::cli
