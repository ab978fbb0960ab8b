// pacbayes: PAC-Bayes bound experiments on the UCI benchmark.
//
// Subcommands:
//   fetch       download datasets into the local cache
//   run         run the experiment protocol and emit a results table
//   preprocess  export an encoded dataset for reproducibility audits
//   table       re-render tables from stored run records
//   verify      run the property/oracle/coverage suites
//
// Exit codes: 0 success, 1 usage error, 2 data/checksum error,
// 3 verification failure.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacbayes/experiment.hpp"
#include "pacbayes/fetch.hpp"
#include "pacbayes/verify.hpp"

namespace fs = std::filesystem;
using namespace pacbayes;

namespace {

fs::path default_cache_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("PACBAYES_CACHE_DIR")) return env;
    return fs::path("uci_cache");
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", std::gmtime(&t));
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw DataError("cannot write " + p.string());
}

// runs/index.jsonl maps configs to stored records
void append_run_index(const fs::path& runs_root, const fs::path& record_path,
                      const RunRecord& rec) {
    nlohmann::ordered_json j;
    j["dataset"] = rec.dataset;
    j["content_hash"] = rec.content_hash;
    j["base_seed"] = rec.config.base_seed;
    j["repeats"] = rec.config.repeats;
    j["lambda"] = rec.config.lambda;
    j["chunk_size"] = rec.config.chunk_size;
    j["mc_samples"] = rec.config.mc_samples;
    j["prior_variance"] = rec.config.prior_variance;
    j["path"] = record_path.string();
    fs::create_directories(runs_root);
    std::ofstream out(runs_root / "index.jsonl", std::ios::binary | std::ios::app);
    out << j.dump() << "\n";
}

int report_checks(const std::vector<verify::CheckResult>& checks) {
    bool all = true;
    for (const auto& c : checks) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        all = all && c.pass;
    }
    return all ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAC-Bayes generalization bounds and the UCI logistic-regression benchmark"};
    app.require_subcommand(1);

    std::vector<std::string> datasets;
    std::string cache_flag, out_path, format = "csv", scope = "fast";
    bool offline = false;
    ExperimentConfig cfg;
    bool add_intercept = false;

    auto* fetch_cmd = app.add_subcommand("fetch", "download datasets into the cache");
    fetch_cmd->add_option("--dataset", datasets, "dataset names (default: all eight)");
    fetch_cmd->add_option("--cache-dir", cache_flag, "cache directory");

    auto* run_cmd = app.add_subcommand("run", "run the experiment protocol");
    run_cmd->add_option("--dataset", datasets, "dataset names")->required();
    run_cmd->add_option("--bounds", cfg.bounds, "bounds to run (maurer ub ours split_kl)");
    run_cmd->add_option("--delta", cfg.delta, "confidence parameter");
    run_cmd->add_option("--lambda", cfg.lambda, "L2 regularization");
    run_cmd->add_option("--repeats", cfg.repeats, "number of shuffled repeats");
    run_cmd->add_option("--seed", cfg.base_seed, "base seed");
    run_cmd->add_option("--mc-samples", cfg.mc_samples, "Monte Carlo weight draws");
    run_cmd->add_option("--chunk-size", cfg.chunk_size, "online estimator refresh interval");
    run_cmd->add_option("--prior-var", cfg.prior_variance, "prior variance sigma_0^2");
    run_cmd->add_option("--test-fraction", cfg.test_fraction, "held-out fraction");
    run_cmd->add_option("--workers", cfg.workers, "parallel repeat workers (0 = auto)");
    run_cmd->add_flag("--offline", offline, "never touch the network");
    run_cmd->add_flag("--add-intercept", add_intercept, "append a constant-1 feature");
    run_cmd->add_option("--cache-dir", cache_flag, "cache directory");
    run_cmd->add_option("--out", out_path, "run-record output file (default runs/<dataset>/<time>)");
    run_cmd->add_option("--format", format, "table format: csv or json-lines");

    auto* pre_cmd = app.add_subcommand("preprocess", "export the encoded dataset");
    pre_cmd->add_option("--dataset", datasets, "dataset name")->required();
    pre_cmd->add_option("--cache-dir", cache_flag, "cache directory");
    pre_cmd->add_option("--out", out_path, "output file (default stdout)");
    pre_cmd->add_flag("--offline", offline, "never touch the network");
    pre_cmd->add_flag("--add-intercept", add_intercept, "append a constant-1 feature");

    auto* table_cmd = app.add_subcommand("table", "render a table from stored run records");
    std::vector<std::string> record_files;
    table_cmd->add_option("records", record_files, "run-record files")->required();
    table_cmd->add_option("--format", format, "table format: csv or json-lines");

    auto* verify_cmd = app.add_subcommand("verify", "run the verification suites");
    verify_cmd->add_option("--scope", scope, "fast | coverage | all");
    verify_cmd->add_option("--cache-dir", cache_flag, "cache directory (scope=all)");
    verify_cmd->add_flag("--offline", offline, "never touch the network");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors are exit 1
    }

    try {
        const fs::path cache_dir = default_cache_dir(cache_flag);
        FetchOptions fopt;
        fopt.offline = offline;
        PreprocessOptions popt;
        popt.append_constant_feature = add_intercept;

        if (*fetch_cmd) {
            if (datasets.empty())
                for (const auto& s : builtin_manifest()) datasets.push_back(s.name);
            for (const auto& name : datasets) {
                const RawDataset raw = fetch_dataset(name, cache_dir, fopt);
                std::cout << name << ": " << raw.rows.size() << " rows cached under "
                          << (cache_dir / name).string() << "\n";
            }
            return 0;
        }

        if (*pre_cmd) {
            const std::string text =
                export_processed(load_processed(datasets.at(0), cache_dir, fopt, popt));
            if (out_path.empty()) std::cout << text;
            else write_text(out_path, text);
            return 0;
        }

        if (*run_cmd) {
            cfg.validate();
            const TableFormat tf = parse_table_format(format);
            std::vector<RunRecord> records;
            for (const auto& name : datasets) {
                const ProcessedDataset data = load_processed(name, cache_dir, fopt, popt);
                std::cerr << name << ": " << data.rows << " rows (" << data.raw_rows
                          << " raw), dim " << data.dim << "; running " << cfg.repeats
                          << " repeats...\n";
                const auto t0 = std::chrono::steady_clock::now();
                RunRecord rec = run_experiment(data, cfg);
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::cerr << name << ": done in " << secs << " s\n";
                const fs::path record_path =
                    out_path.empty() ? fs::path("runs") / name / timestamp() / "record.jsonl"
                                     : fs::path(out_path + (datasets.size() > 1 ? "." + name : ""));
                write_text(record_path, serialize_run_record(rec));
                if (out_path.empty()) append_run_index("runs", record_path, rec);
                std::cerr << name << ": record written to " << record_path.string() << "\n";
                records.push_back(std::move(rec));
            }
            std::cout << emit_table(records, tf);
            return 0;
        }

        if (*table_cmd) {
            const TableFormat tf = parse_table_format(format);
            std::vector<RunRecord> records;
            for (const auto& f : record_files) {
                std::ifstream in(f, std::ios::binary);
                if (!in) throw DataError("cannot read " + f);
                std::ostringstream ss;
                ss << in.rdbuf();
                records.push_back(parse_run_record(ss.str()));
            }
            std::cout << emit_table(records, tf);
            return 0;
        }

        if (*verify_cmd) {
            std::vector<verify::CheckResult> checks;
            if (scope == "fast" || scope == "all") {
                auto fast = verify::run_fast();
                checks.insert(checks.end(), fast.begin(), fast.end());
            }
            if (scope == "coverage" || scope == "all") {
                auto cov = verify::run_coverage();
                checks.insert(checks.end(), cov.begin(), cov.end());
            }
            if (scope == "all") {
                ExperimentConfig defaults;
                for (const auto& target : verify::benchmark_targets()) {
                    const std::string name = target.dataset;
                    if (name != "haberman" && name != "breast-cancer" && name != "tictactoe" &&
                        name != "banknote")
                        continue; // larger datasets run through the acceptance suite
                    const ProcessedDataset data = load_processed(name, cache_dir, fopt);
                    checks.push_back(
                        verify::check_benchmark_row(run_experiment(data, defaults), target));
                }
            }
            if (scope != "fast" && scope != "coverage" && scope != "all") {
                std::cerr << "unknown scope '" << scope << "'\n";
                return 1;
            }
            return report_checks(checks);
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NetworkError& e) {
        std::cerr << "network error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
