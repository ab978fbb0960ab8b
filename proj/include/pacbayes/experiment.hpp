#pragma once
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pacbayes/bounds.hpp"
#include "pacbayes/dataset.hpp"
#include "pacbayes/gaussian.hpp"
#include "pacbayes/logistic.hpp"
#include "pacbayes/online_debias.hpp"

// End-to-end experiment protocol: repeated shuffle/split, training, online
// de-biasing, Monte Carlo statistics over the sigma^2 grid, bound
// minimization, aggregation, and the run-record / table formats.
//
// Run records are fully deterministic in (config, seed): repeats may execute
// on any number of workers, results are reduced in repeat order, and volatile
// quantities (wall time) stay out of the serialized record.
namespace pacbayes {

inline const std::vector<std::string>& canonical_bounds() {
    static const std::vector<std::string> names{"maurer", "ub", "ours", "split_kl"};
    return names;
}

struct ExperimentConfig {
    double delta = 0.05;
    double lambda = 0.01;
    int repeats = 20;
    double test_fraction = 0.2;
    std::size_t chunk_size = 150;
    int mc_samples = 1000;
    double prior_variance = 1.0;
    std::vector<std::string> bounds{"maurer", "ub", "ours"};
    std::uint64_t base_seed = 1;
    int workers = 0; // 0 = hardware concurrency; never affects results

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("config: delta outside (0,1)");
        if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
        if (!(lambda > 0.0)) throw std::invalid_argument("config: lambda must be positive");
        if (mc_samples < 1) throw std::invalid_argument("config: mc_samples must be >= 1");
        if (!(prior_variance > 0.0)) throw std::invalid_argument("config: prior variance must be positive");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw std::invalid_argument("config: test_fraction outside (0,1)");
        if (chunk_size < 1) throw std::invalid_argument("config: chunk_size must be >= 1");
        for (const auto& b : bounds) {
            bool known = false;
            for (const auto& c : canonical_bounds()) known = known || b == c;
            if (!known) throw std::invalid_argument("config: unknown bound '" + b + "'");
        }
    }
};

struct BoundOutcome {
    std::string name;
    double value = 0.0;
    double sigma2 = 0.0;
    BoundReport report;
};

struct RepeatResult {
    int repeat = 0;
    std::uint64_t seed = 0;
    double test_error = 0.0;
    std::vector<BoundOutcome> bounds;
    double wall_ms = 0.0; // console diagnostics only; never serialized
};

struct Aggregate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct RunRecord {
    std::string dataset;
    std::string content_hash;
    std::size_t raw_rows = 0;
    std::size_t processed_rows = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t dim = 0;
    ExperimentConfig config;
    std::vector<RepeatResult> repeats;
    Aggregate test_aggregate;
    std::vector<std::pair<std::string, Aggregate>> bound_aggregates;
};

namespace detail {

inline Aggregate aggregate_of(std::span<const double> xs) {
    Aggregate a;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) a.mean += x;
    a.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return a;
}

} // namespace detail

/// The sigma^2 grid {1/2, ..., 1/2^J}, J = ceil(log2 m).
inline std::vector<double> sigma2_grid(std::size_t m) {
    int J = static_cast<int>(std::ceil(std::log2(static_cast<double>(m))));
    if (J < 1) J = 1;
    std::vector<double> grid(J);
    double v = 0.5;
    for (int j = 0; j < J; ++j, v *= 0.5) grid[j] = v;
    return grid;
}

/// One repeat of the protocol: split, train, de-bias, evaluate the MC
/// statistics for the whole grid, and minimize each requested bound over it.
inline RepeatResult run_repeat(const ProcessedDataset& data, const ExperimentConfig& cfg, int r) {
    const auto t0 = std::chrono::steady_clock::now();
    RepeatResult out;
    out.repeat = r;
    out.seed = cfg.base_seed + static_cast<std::uint64_t>(r);

    const SplitResult split = split_shuffle(data, cfg.test_fraction, out.seed);
    const DataView train = split.train.view();
    const std::size_t m = train.rows;

    TrainConfig tc;
    tc.lambda = cfg.lambda;
    const TrainResult fit = train_logistic(train, tc);
    out.test_error = empirical_zero_one(fit.weights, split.test.view());

    DebiasSchedule schedule = build_schedule(m, cfg.chunk_size);
    const DebiasValues debias = compute_debias(train, schedule, tc);
    const double online_mean = online_mean_loss(debias);

    const std::vector<double> grid = sigma2_grid(m);
    const McGridEvaluator evaluator(fit.weights, train, cfg.mc_samples, out.seed);
    const std::vector<McProfile> profiles = evaluator.profiles(grid, debias.values);

    const GaussianPrior prior{cfg.prior_variance};
    std::vector<SigmaCandidate> candidates(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const McProfile& p = profiles[j];
        BoundInputs in;
        in.profile = p.profile;
        in.kl_complexity = gaussian_kl({fit.weights, grid[j]}, prior);
        in.m = m;
        in.delta = cfg.delta;
        in.online_mean = online_mean;
        in.ub_variance = clip01(p.profile.e_plus + p.profile.e_minus); // 0-1 loss identity
        in.empirical_loss = clip01(p.mean_loss);
        candidates[j] = {grid[j], in};
    }

    for (const std::string& name : cfg.bounds) {
        std::function<BoundReport(const BoundInputs&)> selector;
        if (name == "maurer") selector = maurer_report;
        else if (name == "ub") selector = full_bound_ub;
        else if (name == "ours") selector = full_bound_ours;
        else selector = full_bound_split_kl;
        auto [sigma2, report] = optimize_sigma(candidates, selector);
        out.bounds.push_back({name, report.value, sigma2, std::move(report)});
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Runs every repeat (in parallel across workers when configured), then
/// aggregates in repeat order. A failed repeat aborts the whole run.
inline RunRecord run_experiment(const ProcessedDataset& data, const ExperimentConfig& cfg) {
    cfg.validate();
    RunRecord rec;
    rec.dataset = data.name;
    rec.content_hash = data.content_hash;
    rec.raw_rows = data.raw_rows;
    rec.processed_rows = data.rows;
    rec.dim = data.dim;
    rec.config = cfg;
    {
        const SplitResult probe = split_shuffle(data, cfg.test_fraction, cfg.base_seed);
        rec.train_rows = probe.train.rows;
        rec.test_rows = probe.test.rows;
    }

    rec.repeats.resize(cfg.repeats);
    int workers = cfg.workers;
    if (workers <= 0)
        workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, cfg.repeats);

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker_fn = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= cfg.repeats) return;
            try {
                rec.repeats[r] = run_repeat(data, cfg, r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<double> col(cfg.repeats);
    for (int r = 0; r < cfg.repeats; ++r) col[r] = rec.repeats[r].test_error;
    rec.test_aggregate = detail::aggregate_of(col);
    for (const std::string& name : cfg.bounds) {
        for (int r = 0; r < cfg.repeats; ++r) {
            const auto& bs = rec.repeats[r].bounds;
            const auto it = std::find_if(bs.begin(), bs.end(),
                                         [&](const BoundOutcome& b) { return b.name == name; });
            col[r] = it->value;
        }
        rec.bound_aggregates.emplace_back(name, detail::aggregate_of(col));
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Run-record serialization (JSON lines, deterministic key order)
// ---------------------------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson pairs_json(const std::vector<std::pair<std::string, double>>& ps) {
    ojson arr = ojson::array();
    for (const auto& [k, v] : ps) arr.push_back(ojson::array({k, v}));
    return arr;
}

inline std::vector<std::pair<std::string, double>> pairs_from(const ojson& arr) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& e : arr) out.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
    return out;
}

} // namespace detail

inline std::string serialize_run_record(const RunRecord& rec) {
    using detail::ojson;
    std::ostringstream out;
    ojson head;
    head["record"] = "pacbayes-run-v1";
    head["dataset"] = rec.dataset;
    head["content_hash"] = rec.content_hash;
    head["raw_rows"] = rec.raw_rows;
    head["processed_rows"] = rec.processed_rows;
    head["train_rows"] = rec.train_rows;
    head["test_rows"] = rec.test_rows;
    head["dim"] = rec.dim;
    ojson cfg;
    cfg["delta"] = rec.config.delta;
    cfg["lambda"] = rec.config.lambda;
    cfg["repeats"] = rec.config.repeats;
    cfg["test_fraction"] = rec.config.test_fraction;
    cfg["chunk_size"] = rec.config.chunk_size;
    cfg["mc_samples"] = rec.config.mc_samples;
    cfg["prior_variance"] = rec.config.prior_variance;
    cfg["base_seed"] = rec.config.base_seed;
    cfg["bounds"] = rec.config.bounds;
    head["config"] = cfg;
    out << head.dump() << "\n";
    for (const auto& rep : rec.repeats) {
        ojson j;
        j["repeat"] = rep.repeat;
        j["seed"] = rep.seed;
        j["test_error"] = rep.test_error;
        ojson bs = ojson::array();
        for (const auto& b : rep.bounds) {
            ojson bj;
            bj["name"] = b.name;
            bj["value"] = b.value;
            bj["sigma2"] = b.sigma2;
            bj["components"] = detail::pairs_json(b.report.components);
            bj["delta_split"] = detail::pairs_json(b.report.delta_split);
            bs.push_back(bj);
        }
        j["bounds"] = bs;
        out << j.dump() << "\n";
    }
    ojson agg;
    agg["test"] = ojson::array({rec.test_aggregate.mean, rec.test_aggregate.stderr_});
    for (const auto& [name, a] : rec.bound_aggregates)
        agg[name] = ojson::array({a.mean, a.stderr_});
    ojson tail;
    tail["aggregate"] = agg;
    out << tail.dump() << "\n";
    return out.str();
}

/// Parses a serialized record and recomputes the aggregates from the
/// per-repeat rows, refusing records whose stored aggregates do not match.
inline RunRecord parse_run_record(const std::string& text) {
    using detail::ojson;
    std::istringstream in(text);
    std::string line;
    std::vector<ojson> lines;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(ojson::parse(line));
    if (lines.size() < 3 || !lines.front().contains("record") ||
        lines.front()["record"] != "pacbayes-run-v1" || !lines.back().contains("aggregate"))
        throw std::runtime_error("parse_run_record: not a pacbayes-run-v1 record");

    RunRecord rec;
    const ojson& head = lines.front();
    rec.dataset = head.at("dataset").get<std::string>();
    rec.content_hash = head.at("content_hash").get<std::string>();
    rec.raw_rows = head.at("raw_rows").get<std::size_t>();
    rec.processed_rows = head.at("processed_rows").get<std::size_t>();
    rec.train_rows = head.at("train_rows").get<std::size_t>();
    rec.test_rows = head.at("test_rows").get<std::size_t>();
    rec.dim = head.at("dim").get<std::size_t>();
    const ojson& cfg = head.at("config");
    rec.config.delta = cfg.at("delta").get<double>();
    rec.config.lambda = cfg.at("lambda").get<double>();
    rec.config.repeats = cfg.at("repeats").get<int>();
    rec.config.test_fraction = cfg.at("test_fraction").get<double>();
    rec.config.chunk_size = cfg.at("chunk_size").get<std::size_t>();
    rec.config.mc_samples = cfg.at("mc_samples").get<int>();
    rec.config.prior_variance = cfg.at("prior_variance").get<double>();
    rec.config.base_seed = cfg.at("base_seed").get<std::uint64_t>();
    rec.config.bounds = cfg.at("bounds").get<std::vector<std::string>>();

    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
        const ojson& j = lines[i];
        RepeatResult rep;
        rep.repeat = j.at("repeat").get<int>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.test_error = j.at("test_error").get<double>();
        for (const auto& bj : j.at("bounds")) {
            BoundOutcome b;
            b.name = bj.at("name").get<std::string>();
            b.value = bj.at("value").get<double>();
            b.sigma2 = bj.at("sigma2").get<double>();
            b.report.bound_name = b.name;
            b.report.value = b.value;
            b.report.components = detail::pairs_from(bj.at("components"));
            b.report.delta_split = detail::pairs_from(bj.at("delta_split"));
            rep.bounds.push_back(std::move(b));
        }
        rec.repeats.push_back(std::move(rep));
    }
    if (rec.repeats.size() != static_cast<std::size_t>(rec.config.repeats))
        throw std::runtime_error("parse_run_record: repeat count mismatch");

    std::vector<double> col(rec.repeats.size());
    for (std::size_t r = 0; r < rec.repeats.size(); ++r) col[r] = rec.repeats[r].test_error;
    rec.test_aggregate = detail::aggregate_of(col);
    for (const std::string& name : rec.config.bounds) {
        for (std::size_t r = 0; r < rec.repeats.size(); ++r) {
            const auto& bs = rec.repeats[r].bounds;
            const auto it = std::find_if(bs.begin(), bs.end(),
                                         [&](const BoundOutcome& b) { return b.name == name; });
            if (it == bs.end()) throw std::runtime_error("parse_run_record: missing bound column");
            col[r] = it->value;
        }
        rec.bound_aggregates.emplace_back(name, detail::aggregate_of(col));
    }
    const ojson& agg = lines.back().at("aggregate");
    const auto check = [&](const std::string& key, const Aggregate& a) {
        const ojson& stored = agg.at(key);
        if (stored.at(0).get<double>() != a.mean || stored.at(1).get<double>() != a.stderr_)
            throw std::runtime_error("parse_run_record: stored aggregate for '" + key +
                                     "' does not match the per-repeat rows");
    };
    check("test", rec.test_aggregate);
    for (const auto& [name, a] : rec.bound_aggregates) check(name, a);
    return rec;
}

// ---------------------------------------------------------------------------
// Table emission (benchmark-style rows, csv or json-lines)
// ---------------------------------------------------------------------------

enum class TableFormat { csv, json_lines };

inline TableFormat parse_table_format(const std::string& s) {
    if (s == "csv") return TableFormat::csv;
    if (s == "json-lines" || s == "jsonl") return TableFormat::json_lines;
    throw std::invalid_argument("unknown table format '" + s + "'");
}

/// Renders one row per dataset (ordered by raw size), columns
/// Test/Maurer/UB/... as mean and standard error.
inline std::string emit_table(std::vector<RunRecord> records, TableFormat fmt) {
    if (records.empty()) throw std::invalid_argument("emit_table: no records");
    std::stable_sort(records.begin(), records.end(),
                     [](const RunRecord& a, const RunRecord& b) { return a.raw_rows < b.raw_rows; });
    std::vector<std::string> cols;
    for (const auto& name : canonical_bounds())
        for (const auto& [bn, agg] : records.front().bound_aggregates)
            if (bn == name) cols.push_back(name);
    for (const auto& rec : records) {
        std::vector<std::string> here;
        for (const auto& name : canonical_bounds())
            for (const auto& [bn, agg] : rec.bound_aggregates)
                if (bn == name) here.push_back(name);
        if (here != cols) throw std::invalid_argument("emit_table: records carry different bound sets");
    }

    std::ostringstream out;
    out.precision(17);
    if (fmt == TableFormat::csv) {
        out << "dataset,size,test_mean,test_stderr";
        for (const auto& c : cols) out << ',' << c << "_mean," << c << "_stderr";
        out << "\n";
        for (const auto& rec : records) {
            out << rec.dataset << ',' << rec.raw_rows << ',' << rec.test_aggregate.mean << ','
                << rec.test_aggregate.stderr_;
            for (const auto& c : cols)
                for (const auto& [bn, agg] : rec.bound_aggregates)
                    if (bn == c) out << ',' << agg.mean << ',' << agg.stderr_;
            out << "\n";
        }
    } else {
        for (const auto& rec : records) {
            detail::ojson j;
            j["dataset"] = rec.dataset;
            j["size"] = rec.raw_rows;
            j["test"] = detail::ojson::array({rec.test_aggregate.mean, rec.test_aggregate.stderr_});
            for (const auto& c : cols)
                for (const auto& [bn, agg] : rec.bound_aggregates)
                    if (bn == c) j[c] = detail::ojson::array({agg.mean, agg.stderr_});
            out << j.dump() << "\n";
        }
    }
    return out.str();
}

/// A parsed table row; used for the emit/parse round-trip checks and by the
/// table subcommand.
struct TableRow {
    std::string dataset;
    std::size_t size = 0;
    std::vector<std::pair<std::string, Aggregate>> columns; // test first
};

inline std::vector<TableRow> parse_table_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("parse_table_csv: empty input");
    std::vector<std::string> headers;
    {
        std::istringstream hs(line);
        std::string h;
        while (std::getline(hs, h, ',')) headers.push_back(h);
    }
    std::vector<TableRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != headers.size()) throw std::runtime_error("parse_table_csv: ragged row");
        TableRow row;
        row.dataset = cells[0];
        row.size = std::stoull(cells[1]);
        for (std::size_t c = 2; c + 1 < cells.size(); c += 2) {
            const std::string name = headers[c].substr(0, headers[c].rfind("_mean"));
            row.columns.emplace_back(name, Aggregate{std::stod(cells[c]), std::stod(cells[c + 1])});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace pacbayes
