#pragma once
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pacbayes/logistic.hpp"

// Chunked online estimators and the per-example de-biasing values.
// The predictor for chunk k is trained on every example before that chunk,
// so the value attached to example i never depends on examples i..m.
namespace pacbayes {

struct DebiasSchedule {
    std::size_t chunk_size = 150;
    // boundaries[k] is the end (exclusive) of chunk k; boundaries.back() == m.
    std::vector<std::size_t> boundaries;
    // snapshots[k] is the predictor used inside chunk k; empty for the first
    // (stub) chunk, which is assigned zero error.
    std::vector<std::vector<double>> snapshots;

    std::size_t chunks() const { return boundaries.size(); }
};

struct DebiasValues {
    std::vector<double> values; // one l*_i per training example, in [0,1]
};

/// Chunk layout only: boundaries at chunk_size, 2 chunk_size, ..., m.
/// The last chunk may be short; the first chunk is the zero-error stub.
inline DebiasSchedule build_schedule(std::size_t m, std::size_t chunk_size = 150) {
    if (m < 1) throw std::invalid_argument("build_schedule: m must be >= 1");
    if (chunk_size < 1) throw std::invalid_argument("build_schedule: chunk_size must be >= 1");
    DebiasSchedule s;
    s.chunk_size = chunk_size;
    for (std::size_t b = chunk_size; b < m; b += chunk_size) s.boundaries.push_back(b);
    s.boundaries.push_back(m);
    return s;
}

/// Trains the per-chunk snapshots and evaluates the de-biasing values.
/// Chunk k >= 1 uses a predictor trained on examples [0, boundaries[k-1]);
/// training is warm-started from the previous snapshot as a pure speed aid.
inline DebiasValues compute_debias(DataView train, DebiasSchedule& schedule,
                                   const TrainConfig& cfg) {
    if (schedule.boundaries.empty() || schedule.boundaries.back() != train.rows)
        throw std::invalid_argument("compute_debias: schedule was built for a different m");
    DebiasValues out;
    out.values.assign(train.rows, 0.0);
    schedule.snapshots.assign(schedule.chunks(), {});
    const std::vector<double>* warm = nullptr;
    for (std::size_t k = 1; k < schedule.chunks(); ++k) {
        const std::size_t prefix = schedule.boundaries[k - 1];
        const TrainResult fit = train_logistic(train.prefix(prefix), cfg, warm);
        schedule.snapshots[k] = fit.weights;
        warm = &schedule.snapshots[k];
        for (std::size_t i = prefix; i < schedule.boundaries[k]; ++i)
            out.values[i] = zero_one_loss(schedule.snapshots[k], train.row(i), train.y[i]);
    }
    return out;
}

/// Plain average of the de-biasing values (the online estimators here are
/// deterministic, so no inner expectation is needed).
inline double online_mean_loss(const DebiasValues& v) {
    if (v.values.empty()) return 0.0;
    double s = 0.0;
    for (double x : v.values) s += x;
    return s / static_cast<double>(v.values.size());
}

} // namespace pacbayes
