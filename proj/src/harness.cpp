#include "activesense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#ifndef ACTIVESENSE_GIT_COMMIT
#define ACTIVESENSE_GIT_COMMIT "unknown"
#endif

namespace activesense {

using nlohmann::json;

namespace {

constexpr const char* kCsvHeader =
    "strategy,snr_db,t_explore,trials,wmse_mean,wmse_stderr,failures";

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
}

SensingConfig config_from_json(const json& j) {
    SensingConfig c;
    c.n_tx = get_or(j, "n_tx", c.n_tx);
    c.n_rx = get_or(j, "n_rx", c.n_rx);
    c.m_tx = get_or(j, "m_tx", c.m_tx);
    c.m_rx = get_or(j, "m_rx", c.m_rx);
    c.stages = get_or(j, "stages", c.stages);
    c.t_explore = get_or(j, "t_explore", c.t_explore);
    c.i_max = get_or(j, "i_max", c.i_max);
    c.power = get_or(j, "power", c.power);
    c.grid_size = get_or(j, "grid_size", c.grid_size);
    c.targets = get_or(j, "targets", c.targets);
    if (j.contains("angle_range")) {
        auto r = j.at("angle_range").get<std::vector<double>>();
        if (r.size() != 2) throw ConfigurationError("angle_range needs two entries");
        c.angle_range = {r[0], r[1]};
    }
    if (j.contains("q")) {
        auto q = j.at("q").get<std::vector<double>>();
        c.q = Eigen::Map<RVector>(q.data(), static_cast<Eigen::Index>(q.size()));
    }
    return c;
}

json config_to_json(const SensingConfig& c) {
    json j = {{"n_tx", c.n_tx},         {"n_rx", c.n_rx},     {"m_tx", c.m_tx},
              {"m_rx", c.m_rx},         {"stages", c.stages}, {"t_explore", c.t_explore},
              {"i_max", c.i_max},       {"power", c.power},   {"grid_size", c.grid_size},
              {"targets", c.targets},
              {"angle_range", {c.angle_range.min, c.angle_range.max}}};
    if (c.q.size() != 0) j["q"] = std::vector<double>(c.q.data(), c.q.data() + c.q.size());
    return j;
}

SceneParams scene_from_json(const json& j) {
    auto angles = j.at("angles").get<std::vector<double>>();
    auto coeffs = j.at("coeffs").get<std::vector<std::vector<double>>>();
    if (angles.size() != coeffs.size())
        throw ConfigurationError("trace_scene: angles and coeffs differ in length");
    SceneParams s;
    s.angles = Eigen::Map<RVector>(angles.data(), static_cast<Eigen::Index>(angles.size()));
    s.coeffs.resize(static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (coeffs[i].size() != 2) throw ConfigurationError("trace_scene: coeffs are [re, im]");
        s.coeffs(static_cast<Eigen::Index>(i)) = cd(coeffs[i][0], coeffs[i][1]);
    }
    return s;
}

struct TrialOutcome {
    bool ok = false;
    double error = std::numeric_limits<double>::quiet_NaN();
    double bcrb = std::numeric_limits<double>::quiet_NaN();
    std::vector<TrialStage> stages;
};

struct CellKey {
    Strategy strategy;
    double snr_db;
    int t_explore;
};

}  // namespace

double snr_to_power(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

void ExperimentSpec::validate() const {
    base.validate();
    if (snr_grid.empty()) throw ConfigurationError("snr_grid is empty");
    if (trials < 1) throw ConfigurationError("trials must be positive");
    if (strategies.empty()) throw ConfigurationError("no strategies selected");
    if (t_explore_values.empty()) throw ConfigurationError("t_explore_values is empty");
    for (int t : t_explore_values)
        if (t < 0 || t > base.stages)
            throw ConfigurationError("t_explore value " + std::to_string(t) + " outside [0, " +
                                     std::to_string(base.stages) + "]");
    if (trace_scene && trace_scene->num_targets() != base.targets)
        throw ConfigurationError("trace_scene target count differs from base.targets");
    if (threads < 0) throw ConfigurationError("threads must be nonnegative");
}

ExperimentSpec parse_spec(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigurationError(std::string("invalid configuration JSON: ") + e.what());
    }
    ExperimentSpec s;
    try {
        if (j.contains("base")) s.base = config_from_json(j.at("base"));
        s.snr_grid = get_or(j, "snr_grid", s.snr_grid);
        s.trials = get_or(j, "trials", s.trials);
        s.seed = get_or(j, "seed", s.seed);
        if (j.contains("strategies")) {
            s.strategies.clear();
            for (const auto& name : j.at("strategies").get<std::vector<std::string>>())
                s.strategies.push_back(strategy_from_string(name));
        }
        s.t_explore_values = get_or(j, "t_explore_values", s.t_explore_values);
        s.output = get_or(j, "output", s.output);
        s.alpha_random = get_or(j, "alpha_random", s.alpha_random);
        s.trace = get_or(j, "trace", s.trace);
        if (j.contains("trace_scene") && !j.at("trace_scene").is_null())
            s.trace_scene = scene_from_json(j.at("trace_scene"));
        s.threads = get_or(j, "threads", s.threads);
    } catch (const json::exception& e) {
        throw ConfigurationError(std::string("bad configuration field: ") + e.what());
    }
    s.validate();
    return s;
}

ExperimentSpec load_spec(const std::string& path) { return parse_spec(read_text(path)); }

std::string spec_to_json(const ExperimentSpec& s, int indent) {
    json j;
    j["base"] = config_to_json(s.base);
    j["snr_grid"] = s.snr_grid;
    j["trials"] = s.trials;
    j["seed"] = s.seed;
    std::vector<std::string> names;
    for (Strategy st : s.strategies) names.push_back(to_string(st));
    j["strategies"] = names;
    j["t_explore_values"] = s.t_explore_values;
    j["output"] = s.output;
    j["alpha_random"] = s.alpha_random;
    j["trace"] = s.trace;
    if (s.trace_scene) {
        json coeffs = json::array();
        for (Eigen::Index i = 0; i < s.trace_scene->coeffs.size(); ++i)
            coeffs.push_back({s.trace_scene->coeffs(i).real(), s.trace_scene->coeffs(i).imag()});
        const RVector& a = s.trace_scene->angles;
        j["trace_scene"] = {{"angles", std::vector<double>(a.data(), a.data() + a.size())},
                            {"coeffs", coeffs}};
    }
    j["threads"] = s.threads;
    return j.dump(indent);
}

SceneParams draw_scene(const SensingConfig& config, bool alpha_random, const SeedSequence& trial) {
    std::mt19937_64 rng = trial.stream("scene");
    std::uniform_real_distribution<double> angle(config.angle_range.min, config.angle_range.max);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    SceneParams s;
    s.angles.resize(config.targets);
    s.coeffs.resize(config.targets);
    for (int i = 0; i < config.targets; ++i) s.angles(i) = angle(rng);
    for (int i = 0; i < config.targets; ++i) {
        if (alpha_random) {
            double re = normal(rng);
            double im = normal(rng);
            s.coeffs(i) = cd(re, im);
        } else {
            s.coeffs(i) = std::polar(1.0, phase(rng));
        }
    }
    return s;
}

const CellResult* WmseReport::find(const std::string& strategy, double snr_db,
                                   int t_explore) const {
    for (const CellResult& c : cells)
        if (c.strategy == strategy && c.snr_db == snr_db && c.t_explore == t_explore) return &c;
    return nullptr;
}

WmseReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress) {
    spec.validate();
    std::vector<CellKey> keys;
    for (Strategy st : spec.strategies)
        for (double snr : spec.snr_grid) {
            if (st == Strategy::Proposed) {
                for (int t : spec.t_explore_values) keys.push_back({st, snr, t});
            } else {
                keys.push_back({st, snr, -1});
            }
        }
    std::sort(keys.begin(), keys.end(), [](const CellKey& a, const CellKey& b) {
        const std::string na = to_string(a.strategy), nb = to_string(b.strategy);
        if (na != nb) return na < nb;
        if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
        return a.t_explore < b.t_explore;
    });

    const std::size_t trials = static_cast<std::size_t>(spec.trials);
    const std::size_t jobs = keys.size() * trials;
    std::vector<TrialOutcome> outcomes(jobs);
    const SeedSequence root(spec.seed);

    auto run_job = [&](std::size_t idx) {
        const CellKey& key = keys[idx / trials];
        const std::size_t trial = idx % trials;
        SensingConfig cfg = spec.base;
        cfg.power = snr_to_power(key.snr_db);
        if (key.t_explore >= 0) cfg.t_explore = key.t_explore;
        SeedSequence ts = root.child("trial", trial);
        TrialOutcome& out = outcomes[idx];
        try {
            SceneParams scene = draw_scene(cfg, spec.alpha_random, ts);
            StrategyRun run = run_strategy(key.strategy, scene, cfg, ts);
            out.error = angle_error(scene, run.estimate);
            out.bcrb = run.stages.back().bcrb;
            for (const StageRecord& r : run.stages)
                out.stages.push_back(
                    {r.stage, r.bcrb, r.rx_certificate, r.tx_certificate, r.sq_error});
            out.ok = std::isfinite(out.error);
        } catch (const Error&) {
            out.ok = false;
        }
    };

    unsigned workers = spec.threads > 0 ? static_cast<unsigned>(spec.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(jobs, 1)));
    std::atomic<std::size_t> next{0};
    std::vector<std::size_t> done_per_cell(keys.size(), 0);
    std::mutex mu;
    WmseReport report;
    report.cells.resize(keys.size());

    auto finalize_cell = [&](std::size_t c) {
        const CellKey& key = keys[c];
        CellResult& cell = report.cells[c];
        cell.strategy = to_string(key.strategy);
        cell.snr_db = key.snr_db;
        cell.t_explore = key.t_explore;
        double sum = 0.0, sum_b = 0.0;
        int nb = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            const TrialOutcome& o = outcomes[c * trials + t];
            cell.errors.push_back(o.ok ? o.error : std::numeric_limits<double>::quiet_NaN());
            cell.final_bcrb.push_back(o.ok ? o.bcrb : std::numeric_limits<double>::quiet_NaN());
            cell.stages.push_back(o.stages);
            if (!o.ok) {
                ++cell.failures;
                continue;
            }
            ++cell.trials;
            sum += o.error;
            if (std::isfinite(o.bcrb)) {
                sum_b += o.bcrb;
                ++nb;
            }
        }
        cell.wmse_mean = cell.trials > 0 ? sum / cell.trials : std::numeric_limits<double>::quiet_NaN();
        double ss = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const TrialOutcome& o = outcomes[c * trials + t];
            if (o.ok) ss += (o.error - cell.wmse_mean) * (o.error - cell.wmse_mean);
        }
        cell.wmse_stderr = cell.trials > 1 ? std::sqrt(ss / (cell.trials - 1) / cell.trials) : 0.0;
        cell.bcrb_mean = nb > 0 ? sum_b / nb : std::numeric_limits<double>::quiet_NaN();
    };

    auto worker = [&]() {
        for (;;) {
            std::size_t idx = next.fetch_add(1);
            if (idx >= jobs) return;
            run_job(idx);
            const std::size_t c = idx / trials;
            std::lock_guard<std::mutex> lock(mu);
            if (++done_per_cell[c] == trials) {
                finalize_cell(c);
                if (progress) progress(report.cells[c]);
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const CellResult& cell : report.cells)
        if (cell.failures * 100 > spec.trials)
            throw Error("cell " + cell.strategy + " snr=" + fmt(cell.snr_db) + " failed " +
                        std::to_string(cell.failures) + " of " + std::to_string(spec.trials) +
                        " trials");
    return report;
}

std::string format_csv(const WmseReport& report) {
    std::vector<const CellResult*> rows;
    for (const CellResult& c : report.cells) rows.push_back(&c);
    std::stable_sort(rows.begin(), rows.end(), [](const CellResult* a, const CellResult* b) {
        if (a->strategy != b->strategy) return a->strategy < b->strategy;
        if (a->snr_db != b->snr_db) return a->snr_db < b->snr_db;
        return a->t_explore < b->t_explore;
    });
    std::string out = std::string(kCsvHeader) + "\n";
    for (const CellResult* c : rows) {
        out += c->strategy + "," + fmt(c->snr_db) + "," + std::to_string(c->t_explore) + "," +
               std::to_string(c->trials) + "," + fmt(c->wmse_mean) + "," + fmt(c->wmse_stderr) +
               "," + std::to_string(c->failures) + "\n";
    }
    return out;
}

WmseReport parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw ConfigurationError("unexpected WMSE CSV header");
    WmseReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string item;
        while (std::getline(ls, item, ',')) f.push_back(item);
        if (f.size() != 7) throw ConfigurationError("malformed WMSE CSV row: " + line);
        CellResult c;
        c.strategy = f[0];
        c.snr_db = std::stod(f[1]);
        c.t_explore = std::stoi(f[2]);
        c.trials = std::stoi(f[3]);
        c.wmse_mean = std::stod(f[4]);
        c.wmse_stderr = std::stod(f[5]);
        c.failures = std::stoi(f[6]);
        report.cells.push_back(std::move(c));
    }
    return report;
}

void emit_csv(const WmseReport& report, const std::string& path) {
    write_text(path, format_csv(report));
}

std::string format_run_records(const WmseReport& report) {
    std::string out =
        "strategy,snr_db,t_explore,trial,stage,bcrb,rx_certificate,tx_certificate,sq_angle_error\n";
    for (const CellResult& c : report.cells)
        for (std::size_t t = 0; t < c.stages.size(); ++t)
            for (const TrialStage& s : c.stages[t])
                out += c.strategy + "," + fmt(c.snr_db) + "," + std::to_string(c.t_explore) + "," +
                       std::to_string(t) + "," + std::to_string(s.stage) + "," + fmt(s.bcrb) + "," +
                       (s.rx_certificate ? "1" : "0") + "," + (s.tx_certificate ? "1" : "0") +
                       "," + fmt(s.angle_error) + "\n";
    return out;
}

StrategyRun run_trace(const ExperimentSpec& spec) {
    SensingConfig cfg = spec.base;
    cfg.power = snr_to_power(spec.snr_grid.front());
    cfg.t_explore = spec.t_explore_values.front();
    SeedSequence ts = SeedSequence(spec.seed).child("trace");
    SceneParams scene = spec.trace_scene ? *spec.trace_scene : draw_scene(cfg, spec.alpha_random, ts);
    RunOptions opt;
    opt.trace = true;
    opt.diagnostics = true;
    return run_proposed(scene, cfg, ts, opt);
}

std::string format_posterior_trace(const StrategyRun& run) {
    const Eigen::Index l = run.grid_points.rows();
    std::string out = "stage,grid_point_index";
    for (Eigen::Index t = 0; t < l; ++t) out += ",angle_" + std::to_string(t + 1);
    out += ",weight\n";
    auto dump = [&](int stage, const RVector& w) {
        for (Eigen::Index g = 0; g < w.size(); ++g) {
            out += std::to_string(stage) + "," + std::to_string(g);
            for (Eigen::Index t = 0; t < l; ++t) out += "," + fmt(run.grid_points(t, g));
            out += "," + fmt(w(g)) + "\n";
        }
    };
    dump(0, run.initial_weights);
    for (const StageRecord& r : run.stages) dump(r.stage, r.weights);
    return out;
}

std::string format_beampattern(const StrategyRun& run, const ArrayGeometry& geom) {
    RVector grid = RVector::LinSpaced(kBeampatternPoints, -kPi / 2.0, kPi / 2.0);
    std::string out = "stage,side,beam,angle,gain\n";
    for (const StageRecord& r : run.stages) {
        auto dump = [&](const CMatrix& m, ArraySide side, const char* name) {
            for (Eigen::Index b = 0; b < m.cols(); ++b) {
                RVector g = beampattern(m.col(b), side, geom, grid);
                for (Eigen::Index k = 0; k < grid.size(); ++k)
                    out += std::to_string(r.stage) + "," + name + "," + std::to_string(b) + "," +
                           fmt(grid(k)) + "," + fmt(g(k)) + "\n";
            }
        };
        dump(r.beams.w, ArraySide::Rx, "rx");
        dump(r.beams.v, ArraySide::Tx, "tx");
    }
    return out;
}

void emit_posterior_trace(const StrategyRun& run, const ArrayGeometry& geom,
                          const std::string& trace_path, const std::string& beampattern_path) {
    write_text(trace_path, format_posterior_trace(run));
    write_text(beampattern_path, format_beampattern(run, geom));
}

std::string build_commit() { return ACTIVESENSE_GIT_COMMIT; }

std::string run_meta_json(const ExperimentSpec& spec) {
    json j;
    j["spec"] = json::parse(spec_to_json(spec));
    j["commit"] = build_commit();
    j["seed"] = spec.seed;
    return j.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace activesense
