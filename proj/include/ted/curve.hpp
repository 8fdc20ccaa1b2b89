#pragma once

// Learning-curve sweep: for each (encoder, train size, seed) cell, train on
// a seeded subsample and evaluate on a fixed test set. Cells are
// independent deterministic jobs, so they may run on worker threads; the
// result table is assembled in (encoder, size, seed) order regardless of
// completion order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ted/corpus.hpp"
#include "ted/metrics.hpp"
#include "ted/train.hpp"

namespace ted {

struct CurveCell {
    EncoderKind encoder = EncoderKind::transformer;
    std::size_t train_size = 0;
    std::uint64_t seed = 0;
    double full_dialogue_accuracy = 0.0;
    double action_accuracy = 0.0;
};

struct CurvePoint {
    EncoderKind encoder = EncoderKind::transformer;
    std::size_t train_size = 0;
    std::vector<double> per_seed;  // full-dialogue accuracy per seed
    double mean = 0.0;
    double stddev = 0.0;  // population std; 0 for a single seed
};

struct CurveResult {
    std::vector<CurvePoint> points;
    std::vector<CurveCell> cells;
};

// The first `size` dialogues of a seed-shuffled copy; the same (seed, size)
// yields the same subsample for every encoder, so comparisons are paired.
inline Corpus subsample_dialogues(const Corpus& corpus, std::size_t size, std::uint64_t seed) {
    if (size > corpus.dialogues.size())
        throw UsageError(strf("subsample of %zu dialogues exceeds corpus size %zu", size,
                              corpus.dialogues.size()));
    std::vector<std::size_t> order(corpus.dialogues.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    Corpus out;
    out.metadata = corpus.metadata;
    for (std::size_t i = 0; i < size; ++i) out.dialogues.push_back(corpus.dialogues[order[i]]);
    return out;
}

inline CurveResult run_learning_curve(const Corpus& train_corpus, const Corpus& test_corpus,
                                      const TedConfig& base, const std::vector<std::size_t>& sizes,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<EncoderKind>& encoders,
                                      std::size_t n_threads = 0) {
    if (sizes.empty() || seeds.empty() || encoders.empty())
        throw UsageError("learning curve: sizes, seeds and encoders must be non-empty");
    for (std::size_t s : sizes)
        if (s == 0 || s > train_corpus.dialogues.size())
            throw UsageError(strf("learning curve: size %zu exceeds train corpus (%zu dialogues)",
                                  s, train_corpus.dialogues.size()));

    std::vector<CurveCell> cells;
    for (EncoderKind enc : encoders)
        for (std::size_t size : sizes)
            for (std::uint64_t seed : seeds) cells.push_back({enc, size, seed, 0.0, 0.0});

    if (n_threads == 0) {
        n_threads = std::thread::hardware_concurrency();
        if (n_threads == 0) n_threads = 1;
    }
    n_threads = std::min(n_threads, cells.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size() || failed.load()) return;
            try {
                CurveCell& cell = cells[i];
                Corpus sub = subsample_dialogues(train_corpus, cell.train_size, cell.seed);
                TedConfig cfg = base;
                cfg.encoder = cell.encoder;
                cfg.seed = cell.seed;
                TrainResult trained = train(sub, cfg);
                EvalResult ev = evaluate(trained.model, test_corpus);
                cell.full_dialogue_accuracy = ev.report.full_dialogue_accuracy;
                cell.action_accuracy = ev.report.action_accuracy;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failed.load()) throw DataError("learning curve cell failed: " + first_error);

    CurveResult result;
    result.cells = cells;
    std::size_t idx = 0;
    for (EncoderKind enc : encoders) {
        for (std::size_t size : sizes) {
            CurvePoint p;
            p.encoder = enc;
            p.train_size = size;
            for (std::size_t s = 0; s < seeds.size(); ++s)
                p.per_seed.push_back(cells[idx + s].full_dialogue_accuracy);
            idx += seeds.size();
            double sum = 0.0;
            for (double v : p.per_seed) sum += v;
            p.mean = sum / static_cast<double>(p.per_seed.size());
            double var = 0.0;
            for (double v : p.per_seed) var += (v - p.mean) * (v - p.mean);
            p.stddev = std::sqrt(var / static_cast<double>(p.per_seed.size()));
            result.points.push_back(std::move(p));
        }
    }
    return result;
}

inline std::string curve_to_tsv(const CurveResult& result,
                                const std::vector<std::uint64_t>& seeds) {
    std::string out = "encoder\ttrain_size\tmean\tstd";
    for (std::uint64_t s : seeds) out += strf("\tseed%llu", static_cast<unsigned long long>(s));
    out += "\n";
    for (const CurvePoint& p : result.points) {
        out += strf("%s\t%zu\t%.6f\t%.6f", to_string(p.encoder).c_str(), p.train_size, p.mean,
                    p.stddev);
        for (double v : p.per_seed) out += strf("\t%.6f", v);
        out += "\n";
    }
    return out;
}

// Spearman rank correlation between train size and mean accuracy, used to
// check that a learning curve is non-decreasing up to noise.
inline double spearman_size_vs_mean(const std::vector<CurvePoint>& points) {
    const std::size_t n = points.size();
    if (n < 2) throw UsageError("spearman: need at least 2 points");
    auto ranks = [n](std::vector<double> values) {
        // average ranks for ties
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<double> r(n, 0.0);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> xs, ys;
    for (const auto& p : points) {
        xs.push_back(static_cast<double>(p.train_size));
        ys.push_back(p.mean);
    }
    const auto rx = ranks(xs), ry = ranks(ys);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0)
        throw NumericError("spearman: zero rank variance (constant series)");
    return cov / std::sqrt(vx * vy);
}

}  // namespace ted
