#include "opslab/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "opslab/be_selection.hpp"
#include "opslab/estimators.hpp"
#include "opslab/rng.hpp"

namespace opslab {

namespace {

constexpr const char* kCsvHeader =
    "config_id,env,regime,method,n,seed,k,regret,chosen,walltime_ms";

bool is_estimator_method(const std::string& m) {
    return m == "is" || m == "wis" || m == "pdis" || m.rfind("fqe", 0) == 0;
}

int parse_two_stage_k1(const std::string& method) {
    const auto open = method.find('(');
    if (open == std::string::npos) return 10;
    const std::string args = method.substr(open + 1, method.rfind(')') - open - 1);
    if (args.rfind("k1=", 0) != 0)
        throw std::invalid_argument("unknown two-stage option '" + args + "'");
    return std::stoi(args.substr(3));
}

std::string format_row(const SweepRow& row) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%d,%d,%d,%.6f,%d,%.3f", row.config_id.c_str(),
                  row.env.c_str(), row.regime.c_str(), row.method.c_str(), row.n, row.seed,
                  row.k, row.regret, row.chosen, row.walltime_ms);
    return buf;
}

std::string cell_key(const std::string& config_id, const std::string& method, int n, int seed,
                     int k) {
    std::ostringstream os;
    os << config_id << '|' << method << '|' << n << '|' << seed << '|' << k;
    return os.str();
}

struct Group {
    double sum = 0.0, sumsq = 0.0;
    int count = 0;
};

}  // namespace

void validate_selection_method(const std::string& m, const Mdp& mdp) {
    if (m == "tde" || m == "sbv" || m.rfind("fqe+ibes", 0) == 0) {
        if (m.rfind("fqe+ibes", 0) == 0) parse_two_stage_k1(m);
        return;
    }
    if (m.rfind("ibes", 0) == 0) {
        const auto open = m.find('(');
        if (open != std::string::npos) {
            const std::string args = m.substr(open + 1, m.rfind(')') - open - 1);
            if (args.rfind("target=", 0) != 0)
                throw std::invalid_argument("unknown ibes option '" + args + "'");
            be_target_mode_from_string(args.substr(7));
        }
        return;
    }
    if (is_estimator_method(m)) {
        Dataset probeless;  // only the parse is exercised here
        probeless.horizon = mdp.horizon;
        probeless.num_actions = mdp.num_actions;
        make_estimator(m, mdp, probeless);
        return;
    }
    throw std::invalid_argument(
        "unknown method '" + m +
        "'; valid: tde, sbv, ibes[(target=be|tq)], is, wis, pdis, fqe[(class=...,U=...)], "
        "fqe+ibes[(k1=N)]");
}

SelectionReport run_selection(const std::string& method, const Mdp& mdp,
                              const CandidateSet& candidates, const Dataset& data,
                              std::uint64_t seed) {
    if (method == "tde") return tde_select(candidates, data);
    if (method == "sbv") {
        IbesConfig cfg;
        return sbv_select(mdp, candidates, data, cfg, seed);
    }
    if (method.rfind("fqe+ibes", 0) == 0) {
        TwoStageConfig cfg;
        cfg.k1 = std::min(parse_two_stage_k1(method),
                          static_cast<int>(candidates.entries.size()));
        return two_stage_select(mdp, candidates, data, cfg, seed);
    }
    if (method.rfind("ibes", 0) == 0) {
        IbesConfig cfg;
        const auto open = method.find('(');
        if (open != std::string::npos)
            cfg.target_mode = be_target_mode_from_string(
                method.substr(open + 8, method.rfind(')') - open - 8));
        return ibes_select(mdp, candidates, data, cfg, seed);
    }
    return ops_by_estimate(candidates, make_estimator(method, mdp, data), method);
}

std::vector<SweepRow> load_sweep_csv(const std::string& path) {
    std::vector<SweepRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == kCsvHeader) continue;
        }
        std::istringstream ls(line);
        SweepRow row;
        std::string field;
        std::getline(ls, row.config_id, ',');
        std::getline(ls, row.env, ',');
        std::getline(ls, row.regime, ',');
        std::getline(ls, row.method, ',');
        std::getline(ls, field, ',');
        row.n = std::stoi(field);
        std::getline(ls, field, ',');
        row.seed = std::stoi(field);
        std::getline(ls, field, ',');
        row.k = std::stoi(field);
        std::getline(ls, field, ',');
        row.regret = std::stod(field);
        std::getline(ls, field, ',');
        row.chosen = std::stoi(field);
        std::getline(ls, field, ',');
        row.walltime_ms = std::stod(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

SweepResult run_sweep(const Mdp& mdp, const CandidateSet& candidates, const SweepConfig& cfg) {
    if (cfg.csv_path.empty()) throw std::invalid_argument("run_sweep: csv_path required");
    if (cfg.methods.empty() || cfg.ns.empty() || cfg.ks.empty() || cfg.seeds < 1)
        throw std::invalid_argument("run_sweep: empty grid axis");
    for (const std::string& m : cfg.methods) validate_selection_method(m, mdp);
    for (int k : cfg.ks)
        if (k < 1 || k > static_cast<int>(candidates.entries.size()))
            throw std::invalid_argument("run_sweep: k out of range");

    SweepResult result;
    result.true_values.provenance = "exact_dp";
    for (const auto& entry : candidates.entries)
        result.true_values.values.push_back(exact_policy_value(mdp, entry.policy));

    std::map<std::string, SweepRow> existing;
    for (const auto& row : load_sweep_csv(cfg.csv_path))
        existing[cell_key(row.config_id, row.method, row.n, row.seed, row.k)] = row;

    const bool fresh = !std::filesystem::exists(cfg.csv_path);
    std::ofstream out(cfg.csv_path, std::ios::app);
    if (!out) throw std::runtime_error("run_sweep: cannot open " + cfg.csv_path);
    if (fresh) out << kCsvHeader << '\n';

    const std::string regime_name = regime_to_string(cfg.regime);
    for (int n : cfg.ns) {
        for (int seed = 0; seed < cfg.seeds; ++seed) {
            // all methods in a cell share the same resampled OPS dataset
            const std::uint64_t data_seed =
                derive_seed(cfg.master_seed, static_cast<std::uint64_t>(n) * 10007 + seed);
            Dataset data;
            bool have_data = false;
            for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
                const std::string& method = cfg.methods[mi];
                SelectionReport report;
                bool have_report = false;
                for (int k : cfg.ks) {
                    const std::string key = cell_key(cfg.config_id, method, n, seed, k);
                    if (const auto it = existing.find(key); it != existing.end()) {
                        result.rows.push_back(it->second);
                        continue;
                    }
                    if (!have_data) {
                        data = make_ops_dataset(mdp, candidates, cfg.regime, n, data_seed);
                        have_data = true;
                    }
                    const auto t0 = std::chrono::steady_clock::now();
                    if (!have_report) {
                        report = run_selection(method, mdp, candidates, data,
                                               derive_seed(data_seed, mi));
                        have_report = true;
                    }
                    const auto t1 = std::chrono::steady_clock::now();
                    SweepRow row;
                    row.config_id = cfg.config_id;
                    row.env = cfg.env_name;
                    row.regime = regime_name;
                    row.method = method;
                    row.n = n;
                    row.seed = seed;
                    row.k = k;
                    row.regret = topk_regret(result.true_values, report.ranking, k);
                    row.chosen = report.ranking[0];
                    row.walltime_ms =
                        std::chrono::duration<double, std::milli>(t1 - t0).count();
                    out << format_row(row) << '\n';
                    out.flush();
                    result.rows.push_back(row);
                    ++result.computed;
                }
            }
        }
    }
    return result;
}

std::string sweep_summary_json(const std::vector<SweepRow>& rows, const TrueValues& values) {
    std::map<std::string, std::map<int, std::map<int, Group>>> groups;  // method -> n -> k
    for (const auto& row : rows) {
        Group& g = groups[row.method][row.n][row.k];
        g.sum += row.regret;
        g.sumsq += row.regret * row.regret;
        ++g.count;
    }
    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    for (const auto& [method, by_n] : groups)
        for (const auto& [n, by_k] : by_n)
            for (const auto& [k, g] : by_k) {
                const double mean = g.sum / g.count;
                const double var =
                    g.count > 1 ? std::max(0.0, (g.sumsq - g.sum * mean) / (g.count - 1)) : 0.0;
                nlohmann::json cell;
                cell["method"] = method;
                cell["n"] = n;
                cell["k"] = k;
                cell["mean_regret"] = mean;
                cell["stderr"] = std::sqrt(var / g.count);
                cell["runs"] = g.count;
                j["cells"].push_back(std::move(cell));
            }
    std::set<int> ks;
    for (const auto& row : rows) ks.insert(row.k);
    j["random_baseline"] = nlohmann::json::object();
    for (int k : ks)
        j["random_baseline"][std::to_string(k)] = random_baseline_regret(values, k, 10000, 0);
    j["num_candidates"] = values.values.size();
    j["true_values_provenance"] = values.provenance;
    return j.dump(2);
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::vector<std::string> write_sweep_report(const std::vector<SweepRow>& rows,
                                            const TrueValues& values,
                                            const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::set<std::pair<std::string, int>> charts;  // (env, k)
    for (const auto& row : rows) charts.insert({row.env, row.k});

    std::vector<std::string> written;
    for (const auto& [env, k] : charts) {
        std::map<std::string, std::map<int, Group>> series;  // method -> n
        std::set<int> ns;
        for (const auto& row : rows) {
            if (row.env != env || row.k != k) continue;
            Group& g = series[row.method][row.n];
            g.sum += row.regret;
            g.sumsq += row.regret * row.regret;
            ++g.count;
            ns.insert(row.n);
        }
        if (ns.empty()) continue;

        const double width = 640, height = 420, ml = 60, mr = 170, mt = 30, mb = 50;
        const double x0 = std::log10(static_cast<double>(*ns.begin()));
        const double x1 = std::log10(static_cast<double>(*ns.rbegin()));
        auto sx = [&](int n) {
            const double t = x1 > x0 ? (std::log10(static_cast<double>(n)) - x0) / (x1 - x0) : 0.5;
            return ml + t * (width - ml - mr);
        };
        auto sy = [&](double r) { return mt + (1.0 - std::clamp(r, 0.0, 1.0)) * (height - mt - mb); };

        std::ostringstream svg;
        svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
            << height << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
        svg << "<line x1='" << ml << "' y1='" << sy(0) << "' x2='" << width - mr << "' y2='"
            << sy(0) << "' stroke='black'/>\n";
        svg << "<line x1='" << ml << "' y1='" << sy(0) << "' x2='" << ml << "' y2='" << sy(1)
            << "' stroke='black'/>\n";
        for (int n : ns)
            svg << "<text x='" << sx(n) << "' y='" << height - mb + 20
                << "' font-size='11' text-anchor='middle'>" << n << "</text>\n";
        for (double r : {0.0, 0.25, 0.5, 0.75, 1.0})
            svg << "<text x='" << ml - 8 << "' y='" << sy(r) + 4
                << "' font-size='11' text-anchor='end'>" << r << "</text>\n";
        svg << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 12
            << "' font-size='12' text-anchor='middle'>episodes</text>\n";
        svg << "<text x='16' y='" << (mt + height - mb) / 2
            << "' font-size='12' text-anchor='middle' transform='rotate(-90 16 "
            << (mt + height - mb) / 2 << ")'>top-" << k << " regret</text>\n";

        const double baseline = random_baseline_regret(values, k, 10000, 0);
        svg << "<line x1='" << ml << "' y1='" << sy(baseline) << "' x2='" << width - mr
            << "' y2='" << sy(baseline)
            << "' stroke='gray' stroke-dasharray='6 4'/>\n<text x='" << width - mr + 6 << "' y='"
            << sy(baseline) + 4 << "' font-size='11' fill='gray'>random</text>\n";

        int color_idx = 0;
        double legend_y = mt + 10;
        for (const auto& [method, by_n] : series) {
            const char* color = kPalette[color_idx++ % 8];
            std::ostringstream line, band_top;
            std::vector<std::pair<double, double>> bot;
            for (int n : ns) {
                const auto it = by_n.find(n);
                if (it == by_n.end()) continue;
                const Group& g = it->second;
                const double mean = g.sum / g.count;
                const double var =
                    g.count > 1 ? std::max(0.0, (g.sumsq - g.sum * mean) / (g.count - 1)) : 0.0;
                const double se = std::sqrt(var / g.count);
                line << sx(n) << ',' << sy(mean) << ' ';
                band_top << sx(n) << ',' << sy(mean + se) << ' ';
                bot.emplace_back(sx(n), sy(mean - se));
            }
            // bottom edge reversed to close the band polygon
            std::ostringstream band;
            band << band_top.str();
            for (auto it = bot.rbegin(); it != bot.rend(); ++it)
                band << it->first << ',' << it->second << ' ';
            svg << "<polygon points='" << band.str() << "' fill='" << color
                << "' fill-opacity='0.15' stroke='none'/>\n";
            svg << "<polyline points='" << line.str() << "' fill='none' stroke='" << color
                << "' stroke-width='2'/>\n";
            svg << "<rect x='" << width - mr + 6 << "' y='" << legend_y - 9
                << "' width='14' height='4' fill='" << color << "'/>\n<text x='"
                << width - mr + 26 << "' y='" << legend_y << "' font-size='12'>" << method
                << "</text>\n";
            legend_y += 18;
        }
        svg << "</svg>\n";

        const std::string path = out_dir + "/" + env + "_k" + std::to_string(k) + ".svg";
        std::ofstream file(path);
        if (!file) throw std::runtime_error("write_sweep_report: cannot open " + path);
        file << svg.str();
        written.push_back(path);
    }
    return written;
}

}  // namespace opslab
