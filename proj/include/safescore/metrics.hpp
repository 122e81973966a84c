#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "safescore/errors.hpp"
#include "safescore/forest.hpp"
#include "safescore/ingest.hpp"
#include "safescore/io.hpp"
#include "safescore/rng.hpp"
#include "safescore/types.hpp"

namespace safescore {

// Crash (class 1) is the positive class throughout.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }

    double accuracy() const {
        return total() > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
    }

    std::optional<double> precision_crash() const {
        if (tp + fp == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }

    std::optional<double> recall_crash() const {
        if (tp + fn == 0) return std::nullopt;
        return static_cast<double>(tp) / static_cast<double>(tp + fn);
    }

    std::optional<double> precision_safe() const {
        if (tn + fn == 0) return std::nullopt;
        return static_cast<double>(tn) / static_cast<double>(tn + fn);
    }

    std::optional<double> recall_safe() const {
        if (tn + fp == 0) return std::nullopt;
        return static_cast<double>(tn) / static_cast<double>(tn + fp);
    }

    std::optional<double> f1_crash() const {
        const auto p = precision_crash();
        const auto r = recall_crash();
        if (!p || !r || *p + *r == 0.0) return std::nullopt;
        return 2.0 * *p * *r / (*p + *r);
    }

    json to_json() const {
        auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
        return json{{"tp", tp},
                    {"fp", fp},
                    {"fn", fn},
                    {"tn", tn},
                    {"accuracy", accuracy()},
                    {"precision_crash", opt(precision_crash())},
                    {"recall_crash", opt(recall_crash())},
                    {"precision_safe", opt(precision_safe())},
                    {"recall_safe", opt(recall_safe())},
                    {"f1_crash", opt(f1_crash())}};
    }
};

inline ConfusionMatrix confusion(const std::vector<Label>& predicted,
                                 const std::vector<Label>& truth) {
    if (predicted.size() != truth.size()) throw DataError("prediction/truth length mismatch");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == Label::Crash;
        const bool t = truth[i] == Label::Crash;
        if (p && t)
            ++m.tp;
        else if (p && !t)
            ++m.fp;
        else if (!p && t)
            ++m.fn;
        else
            ++m.tn;
    }
    return m;
}

inline ConfusionMatrix confusion_at_threshold(const std::vector<double>& scores,
                                              const std::vector<Label>& truth, double threshold) {
    std::vector<Label> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        preds[i] = scores[i] >= threshold ? Label::Crash : Label::Safe;
    return confusion(preds, truth);
}

// Probability that a random crash outranks a random non-crash, with ties
// counted half (Mann-Whitney statistic via midranks).
inline double roc_auc(const std::vector<double>& scores, const std::vector<Label>& truth) {
    if (scores.size() != truth.size()) throw DataError("scores/truth length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (Label l : truth)
        if (l == Label::Crash) ++n_pos;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs both classes present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (truth[order[k]] == Label::Crash) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct PrMetrics {
    std::vector<PrPoint> curve;  // descending threshold, one point per distinct score
    double average_precision = 0.0;
};

// Step-interpolated average precision: AP = sum over thresholds of
// (recall step) * precision, sweeping thresholds from high to low.
inline PrMetrics pr_metrics(const std::vector<double>& scores, const std::vector<Label>& truth) {
    if (scores.size() != truth.size()) throw DataError("scores/truth length mismatch");
    const std::size_t n = scores.size();
    std::int64_t total_pos = 0;
    for (Label l : truth)
        if (l == Label::Crash) ++total_pos;
    if (total_pos == 0) throw DataError("average precision needs at least one positive");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    PrMetrics out;
    std::int64_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (truth[order[k]] == Label::Crash)
                ++tp;
            else
                ++fp;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        out.curve.push_back({scores[order[i]], precision, recall});
        out.average_precision += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return out;
}

// 5x5 matrix over risk levels; counts[expected][predicted].
struct OrdinalConfusion {
    std::array<std::array<std::int64_t, 5>, 5> counts{};
    std::int64_t total = 0;

    double accuracy() const {
        if (total == 0) return 0.0;
        std::int64_t hit = 0;
        for (int i = 0; i < 5; ++i) hit += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        return static_cast<double>(hit) / static_cast<double>(total);
    }

    int max_distance() const {
        int dmax = 0;
        for (int e = 0; e < 5; ++e)
            for (int p = 0; p < 5; ++p)
                if (counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(p)] > 0)
                    dmax = std::max(dmax, std::abs(e - p));
        return dmax;
    }

    // Share of misclassifications that land in an adjacent band.  With no
    // misclassifications at all this is vacuously 1.
    double adjacent_share() const {
        std::int64_t errors = 0, adjacent = 0;
        for (int e = 0; e < 5; ++e)
            for (int p = 0; p < 5; ++p) {
                if (e == p) continue;
                const std::int64_t c = counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(p)];
                errors += c;
                if (std::abs(e - p) == 1) adjacent += c;
            }
        return errors == 0 ? 1.0 : static_cast<double>(adjacent) / static_cast<double>(errors);
    }

    json to_json() const {
        json rows = json::array();
        for (const auto& row : counts) rows.push_back(row);
        return json{{"counts", rows},
                    {"total", total},
                    {"accuracy", accuracy()},
                    {"max_distance", max_distance()},
                    {"adjacent_share", adjacent_share()}};
    }
};

inline OrdinalConfusion ordinal_confusion(const std::vector<RiskLevel>& predicted,
                                          const std::vector<RiskLevel>& expected) {
    if (predicted.size() != expected.size()) throw DataError("prediction/expected length mismatch");
    OrdinalConfusion m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        ++m.counts[static_cast<std::size_t>(rank(expected[i]))][static_cast<std::size_t>(rank(predicted[i]))];
        ++m.total;
    }
    return m;
}

struct CVSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    double ci_lo = 0.0;   // normal-approximation 95% interval on the mean
    double ci_hi = 0.0;
    double cv_percent = 0.0;

    json to_json() const {
        return json{{"mean", mean},
                    {"stddev", stddev},
                    {"ci_lo", ci_lo},
                    {"ci_hi", ci_hi},
                    {"cv_percent", cv_percent}};
    }
};

inline CVSummary summarize_folds(const std::vector<double>& values) {
    CVSummary s;
    const std::size_t n = values.size();
    if (n == 0) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
    }
    const double half = 1.96 * s.stddev / std::sqrt(static_cast<double>(n));
    s.ci_lo = s.mean - half;
    s.ci_hi = s.mean + half;
    s.cv_percent = s.mean != 0.0 ? 100.0 * s.stddev / s.mean : 0.0;
    return s;
}

struct FoldMetrics {
    std::uint64_t iteration_seed = 0;
    int fold = 0;
    double accuracy = 0.0;
    double auc = 0.0;
};

struct CVReport {
    std::vector<FoldMetrics> folds;
    CVSummary accuracy;
    CVSummary auc;

    json to_json() const {
        json jf = json::array();
        for (const auto& f : folds)
            jf.push_back(json{{"iteration_seed", f.iteration_seed},
                              {"fold", f.fold},
                              {"accuracy", f.accuracy},
                              {"auc", f.auc}});
        return json{{"folds", jf}, {"accuracy", accuracy.to_json()}, {"auc", auc.to_json()}};
    }
};

// Class-stratified k-fold, repeated once per iteration seed.  Every
// iteration reshuffles fold assignment and retrains; the summary pools all
// k * n_seeds folds.
inline CVReport cross_validate(const LabeledDataset& data, int k,
                               const std::vector<std::uint64_t>& seeds,
                               const ForestParams& base_params) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2");
    if (seeds.empty()) throw ConfigError("cross-validation needs at least one seed");
    CVReport report;
    for (const std::uint64_t seed : seeds) {
        // Deal shuffled per-class indices round-robin across folds.
        std::vector<int> fold_of(data.size(), 0);
        for (int cls = 0; cls < 2; ++cls) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < data.size(); ++i)
                if (label_value(data.labels[i]) == cls) idx.push_back(i);
            Rng rng(mix_seed(seed, 0xF01Du, static_cast<std::uint64_t>(cls)));
            rng.shuffle(idx);
            for (std::size_t p = 0; p < idx.size(); ++p)
                fold_of[idx[p]] = static_cast<int>(p % static_cast<std::size_t>(k));
        }
        for (int f = 0; f < k; ++f) {
            LabeledDataset train, test;
            train.schema_id = test.schema_id = data.schema_id;
            for (std::size_t i = 0; i < data.size(); ++i) {
                LabeledDataset& dst = fold_of[i] == f ? test : train;
                dst.append(data.ids[i], data.contexts[i], data.labels[i], data.provenance[i]);
            }
            ForestParams params = base_params;
            params.seed = mix_seed(seed, 0x7EE5u, static_cast<std::uint64_t>(f));
            const Forest model = train_forest(train, params);
            std::vector<double> scores(test.size());
            std::vector<Label> preds(test.size());
            for (std::size_t i = 0; i < test.size(); ++i) {
                scores[i] = model.predict_proba(test.contexts[i]).p_crash;
                preds[i] = scores[i] >= 0.5 ? Label::Crash : Label::Safe;
            }
            FoldMetrics fm;
            fm.iteration_seed = seed;
            fm.fold = f;
            fm.accuracy = confusion(preds, test.labels).accuracy();
            fm.auc = roc_auc(scores, test.labels);
            report.folds.push_back(fm);
        }
    }
    std::vector<double> accs, aucs;
    for (const auto& f : report.folds) {
        accs.push_back(f.accuracy);
        aucs.push_back(f.auc);
    }
    report.accuracy = summarize_folds(accs);
    report.auc = summarize_folds(aucs);
    return report;
}

}  // namespace safescore
