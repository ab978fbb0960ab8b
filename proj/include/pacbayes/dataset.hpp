#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacbayes/logistic.hpp"
#include "pacbayes/rng.hpp"

// UCI benchmark datasets: manifest, raw parsing, preprocessing (missing-row
// removal, one-hot encoding, [-1,1] scaling) and deterministic shuffling.
namespace pacbayes {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ColumnKind : std::uint8_t { numeric, categorical };

/// Pinned description of one benchmark dataset: where it lives, its exact raw
/// row count, the label mapping, and the per-column schema.
struct DatasetSpec {
    std::string name;
    std::string remote_path;           // relative to the repository base URL
    std::string cache_file;
    std::size_t expected_rows = 0;     // raw rows, before missing-value removal
    std::string sha256;                // empty: pin on first fetch
    int label_col = -1;                // -1 means last column
    std::vector<int> drop_cols;        // e.g. sample-id columns
    std::vector<ColumnKind> feature_kinds; // for kept feature columns, in order
    std::string positive_label;
    std::string negative_label;
    std::string missing_marker = "?";
};

inline std::vector<ColumnKind> kinds_all(std::size_t n, ColumnKind k) {
    return std::vector<ColumnKind>(n, k);
}

/// The eight benchmark datasets, ranked by size.
inline const std::vector<DatasetSpec>& builtin_manifest() {
    static const std::vector<DatasetSpec> manifest = [] {
        std::vector<DatasetSpec> m;
        m.push_back({"haberman", "haberman/haberman.data", "haberman.data", 306, "",
                     -1, {}, kinds_all(3, ColumnKind::numeric), "2", "1", "?"});
        m.push_back({"breast-cancer", "breast-cancer-wisconsin/breast-cancer-wisconsin.data",
                     "breast-cancer-wisconsin.data", 699, "",
                     -1, {0}, kinds_all(9, ColumnKind::numeric), "4", "2", "?"});
        m.push_back({"tictactoe", "tic-tac-toe/tic-tac-toe.data", "tic-tac-toe.data", 958, "",
                     -1, {}, kinds_all(9, ColumnKind::categorical), "positive", "negative", "?"});
        m.push_back({"banknote", "00267/data_banknote_authentication.txt",
                     "data_banknote_authentication.txt", 1372, "",
                     -1, {}, kinds_all(4, ColumnKind::numeric), "1", "0", "?"});
        m.push_back({"kr-vs-kp", "chess/king-rook-vs-king-pawn/kr-vs-kp.data", "kr-vs-kp.data",
                     3196, "", -1, {}, kinds_all(36, ColumnKind::categorical), "won", "nowin", "?"});
        m.push_back({"spambase", "spambase/spambase.data", "spambase.data", 4601, "",
                     -1, {}, kinds_all(57, ColumnKind::numeric), "1", "0", "?"});
        m.push_back({"mushroom", "mushroom/agaricus-lepiota.data", "agaricus-lepiota.data",
                     8124, "", 0, {}, kinds_all(22, ColumnKind::categorical), "p", "e", "?"});
        DatasetSpec adult{"adult", "adult/adult.data", "adult.data", 32561, "",
                          -1, {}, {}, ">50K", "<=50K", "?"};
        using CK = ColumnKind;
        adult.feature_kinds = {CK::numeric, CK::categorical, CK::numeric, CK::categorical,
                               CK::numeric, CK::categorical, CK::categorical, CK::categorical,
                               CK::categorical, CK::categorical, CK::numeric, CK::numeric,
                               CK::numeric, CK::categorical};
        m.push_back(std::move(adult));
        return m;
    }();
    return manifest;
}

inline const DatasetSpec& manifest_entry(const std::string& name) {
    for (const auto& s : builtin_manifest())
        if (s.name == name) return s;
    throw DataError("unknown dataset '" + name + "'");
}

/// Parsed-but-unencoded dataset: feature cells as strings plus a label string
/// per row, with the per-column kinds.
struct RawDataset {
    std::string name;
    std::vector<std::vector<std::string>> rows; // feature cells only
    std::vector<std::string> labels;
    std::vector<ColumnKind> kinds;
    std::string positive_label, negative_label, missing_marker;
    std::string content_hash; // of the raw bytes
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    std::size_t a = 0, b = s.size();
    while (a < b && ws(s[a])) ++a;
    while (b > a && ws(s[b - 1])) --b;
    return s.substr(a, b - a);
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xF];
    return out;
}

} // namespace detail

/// Parses raw comma-separated bytes against a dataset spec. Cells are
/// trimmed; dropped columns removed; the label column extracted. Rows with
/// missing cells are kept (preprocess drops them).
inline RawDataset parse_raw(const DatasetSpec& spec, const std::string& bytes) {
    RawDataset raw;
    raw.name = spec.name;
    raw.kinds = spec.feature_kinds;
    raw.positive_label = spec.positive_label;
    raw.negative_label = spec.negative_label;
    raw.missing_marker = spec.missing_marker;
    raw.content_hash = detail::hex64(detail::fnv1a64(bytes));

    const std::size_t n_cols = spec.feature_kinds.size() + 1 + spec.drop_cols.size();
    const int label_col = spec.label_col < 0 ? static_cast<int>(n_cols) - 1 : spec.label_col;

    std::istringstream in(bytes);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(t);
        while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
        if (t.back() == ',') cells.push_back("");
        if (cells.size() != n_cols)
            throw DataError(spec.name + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(n_cols));
        std::vector<std::string> feats;
        feats.reserve(spec.feature_kinds.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (static_cast<int>(c) == label_col) continue;
            if (std::find(spec.drop_cols.begin(), spec.drop_cols.end(), static_cast<int>(c)) !=
                spec.drop_cols.end())
                continue;
            feats.push_back(cells[c]);
        }
        raw.rows.push_back(std::move(feats));
        raw.labels.push_back(cells[label_col]);
    }
    if (spec.expected_rows > 0 && raw.rows.size() != spec.expected_rows)
        throw DataError(spec.name + ": parsed " + std::to_string(raw.rows.size()) +
                        " rows, manifest pins " + std::to_string(spec.expected_rows));
    return raw;
}

/// Encoded dataset: features scaled to [-1,1], binary labels, provenance.
struct ProcessedDataset {
    std::string name;
    std::size_t rows = 0;
    std::size_t raw_rows = 0; // before missing-value removal
    std::size_t dim = 0;
    std::vector<double> x; // row-major
    std::vector<std::uint8_t> y;
    std::vector<std::string> column_names;
    std::string content_hash;       // of the raw bytes
    std::string preprocess_version = "1";
    std::string label_mapping;      // e.g. "positive=4 negative=2"

    DataView view() const { return {x.data(), y.data(), rows, dim}; }
};

struct PreprocessOptions {
    bool append_constant_feature = false; // optional intercept column
};

/// Drops rows with missing cells, one-hot encodes categorical columns
/// (vocabulary from every non-missing cell of the full raw file), maps labels
/// through the pinned mapping, and scales each column affinely to [-1,1]
/// (constant columns map to 0).
inline ProcessedDataset preprocess(const RawDataset& raw, const PreprocessOptions& opt = {}) {
    const std::size_t n_feat = raw.kinds.size();
    // categorical vocabularies from the full file
    std::vector<std::vector<std::string>> vocab(n_feat);
    for (std::size_t c = 0; c < n_feat; ++c) {
        if (raw.kinds[c] != ColumnKind::categorical) continue;
        std::set<std::string> seen;
        for (const auto& r : raw.rows)
            if (r[c] != raw.missing_marker) seen.insert(r[c]);
        vocab[c].assign(seen.begin(), seen.end());
    }

    ProcessedDataset out;
    out.name = raw.name;
    out.raw_rows = raw.rows.size();
    out.content_hash = raw.content_hash;
    out.label_mapping = "positive=" + raw.positive_label + " negative=" + raw.negative_label;

    for (std::size_t c = 0; c < n_feat; ++c) {
        if (raw.kinds[c] == ColumnKind::numeric) {
            out.column_names.push_back("c" + std::to_string(c));
        } else {
            for (const auto& v : vocab[c])
                out.column_names.push_back("c" + std::to_string(c) + "=" + v);
        }
    }
    if (opt.append_constant_feature) out.column_names.push_back("const");
    out.dim = out.column_names.size();

    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& cells = raw.rows[r];
        bool missing = false;
        for (const auto& cell : cells)
            if (cell == raw.missing_marker) { missing = true; break; }
        if (missing) continue;

        std::uint8_t label;
        if (raw.labels[r] == raw.positive_label) label = 1;
        else if (raw.labels[r] == raw.negative_label) label = 0;
        else throw DataError(raw.name + ": non-binary label value '" + raw.labels[r] + "'");

        for (std::size_t c = 0; c < n_feat; ++c) {
            if (raw.kinds[c] == ColumnKind::numeric) {
                try {
                    std::size_t pos = 0;
                    const double v = std::stod(cells[c], &pos);
                    if (pos != cells[c].size()) throw std::invalid_argument("trailing");
                    out.x.push_back(v);
                } catch (const std::exception&) {
                    throw DataError(raw.name + ": non-numeric cell '" + cells[c] + "' in column " +
                                    std::to_string(c));
                }
            } else {
                for (const auto& v : vocab[c]) out.x.push_back(cells[c] == v ? 1.0 : 0.0);
            }
        }
        if (opt.append_constant_feature) out.x.push_back(1.0);
        out.y.push_back(label);
        ++out.rows;
    }
    if (out.rows == 0) throw DataError(raw.name + ": empty dataset after missing-value removal");

    // column-wise affine map to [-1, 1]; constant columns to 0
    for (std::size_t c = 0; c < out.dim; ++c) {
        double lo = out.x[c], hi = out.x[c];
        for (std::size_t r = 1; r < out.rows; ++r) {
            const double v = out.x[r * out.dim + c];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) {
            const double scale = 2.0 / (hi - lo);
            for (std::size_t r = 0; r < out.rows; ++r) {
                double& v = out.x[r * out.dim + c];
                v = std::clamp((v - lo) * scale - 1.0, -1.0, 1.0);
            }
        } else {
            for (std::size_t r = 0; r < out.rows; ++r) out.x[r * out.dim + c] = 0.0;
        }
    }
    return out;
}

/// Deterministic shuffle + split: the first ceil((1-f) m) rows of the
/// permuted order are the training set (in the order used by the online
/// schedule), the remainder the test set.
struct SplitResult {
    ProcessedDataset train;
    ProcessedDataset test;
};

inline SplitResult split_shuffle(const ProcessedDataset& data, double test_fraction,
                                 std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split_shuffle: test_fraction outside (0,1)");
    const std::size_t m = data.rows;
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    const std::uint64_t key = rng::stream_key(seed, 0x5b17); // split stream
    for (std::size_t i = m; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng::below(key, m - i, i));
        std::swap(perm[i - 1], perm[j]);
    }
    const std::size_t train_rows =
        static_cast<std::size_t>(std::ceil((1.0 - test_fraction) * static_cast<double>(m)));

    SplitResult out;
    for (auto* part : {&out.train, &out.test}) {
        part->name = data.name;
        part->raw_rows = data.raw_rows;
        part->dim = data.dim;
        part->column_names = data.column_names;
        part->content_hash = data.content_hash;
        part->preprocess_version = data.preprocess_version;
        part->label_mapping = data.label_mapping;
    }
    for (std::size_t i = 0; i < m; ++i) {
        ProcessedDataset& part = i < train_rows ? out.train : out.test;
        const std::size_t src = perm[i];
        part.x.insert(part.x.end(), data.x.begin() + src * data.dim,
                      data.x.begin() + (src + 1) * data.dim);
        part.y.push_back(data.y[src]);
        ++part.rows;
    }
    return out;
}

/// Columnar text export for reproducibility audits: one header line with the
/// column names, then one row per example ending in the label.
inline std::string export_processed(const ProcessedDataset& d) {
    std::ostringstream out;
    out.precision(17);
    out << "# pacbayes-processed v" << d.preprocess_version << " name=" << d.name
        << " rows=" << d.rows << " dim=" << d.dim << " hash=" << d.content_hash << "\n";
    for (std::size_t c = 0; c < d.dim; ++c) out << d.column_names[c] << ' ';
    out << "label\n";
    for (std::size_t r = 0; r < d.rows; ++r) {
        for (std::size_t c = 0; c < d.dim; ++c) out << d.x[r * d.dim + c] << ' ';
        out << static_cast<int>(d.y[r]) << "\n";
    }
    return out.str();
}

} // namespace pacbayes
