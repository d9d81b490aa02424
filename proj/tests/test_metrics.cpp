#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mistfed/metrics.hpp"
#include "mistfed/rng.hpp"

using mistfed::ParamVector;
using mistfed::RngStream;

namespace {

// Independent oracle: fraction of (positive, negative) pairs ranked
// correctly, ties counted 1/2.
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("classification metrics on hand-counted confusion") {
    const std::vector<int> preds{1, 1, 0, 0};
    const std::vector<int> labels{1, 0, 0, 0};
    const auto m = mistfed::classification_metrics(preds, labels, 1);
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(m.degenerate);
}

TEST_CASE("perfect predictions give all ones") {
    const std::vector<int> preds{0, 1, 1, 0};
    const auto m = mistfed::classification_metrics(preds, preds, 1);
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
}

TEST_CASE("all-one-class predictions on balanced binary data") {
    const std::vector<int> preds{1, 1, 1, 1};
    const std::vector<int> labels{1, 1, 0, 0};
    const auto m = mistfed::classification_metrics(preds, labels, 1);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.recall == 1.0);

    const std::vector<int> zeros{0, 0, 0, 0};
    const auto m0 = mistfed::classification_metrics(zeros, labels, 1);
    CHECK(m0.accuracy == doctest::Approx(0.5));
    CHECK(m0.recall == 0.0);
    CHECK(m0.precision == 0.0);
    CHECK(m0.degenerate);  // no predicted positives
}

TEST_CASE("macro averaging over three classes") {
    // per class one-vs-rest, hand-counted:
    //   class 0: tp=1 fp=0 fn=1 -> P=1,   R=1/2, F1=2/3
    //   class 1: tp=1 fp=1 fn=0 -> P=1/2, R=1,   F1=2/3
    //   class 2: tp=1 fp=1 fn=1 -> P=1/2, R=1/2, F1=1/2
    const std::vector<int> preds{0, 1, 1, 2, 2};
    const std::vector<int> labels{0, 0, 1, 2, 1};
    const auto m = mistfed::classification_metrics(preds, labels, 1);
    CHECK(m.accuracy == doctest::Approx(0.6));
    CHECK(m.precision == doctest::Approx((1.0 + 0.5 + 0.5) / 3.0));
    CHECK(m.recall == doctest::Approx((0.5 + 1.0 + 0.5) / 3.0));
    CHECK(m.f1 == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0 + 0.5) / 3.0));
}

TEST_CASE("classification_metrics rejects empty or mismatched input") {
    const std::vector<int> empty;
    CHECK_THROWS_AS(mistfed::classification_metrics(empty, empty, 1), mistfed::UsageError);
    const std::vector<int> a{1};
    const std::vector<int> b{1, 0};
    CHECK_THROWS_AS(mistfed::classification_metrics(a, b, 1), mistfed::UsageError);
}

TEST_CASE("roc: perfect ranking, all ties, and the worked four-sample case") {
    const std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    CHECK(mistfed::roc_auc(perfect, labels).auc == doctest::Approx(1.0));

    const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
    CHECK(mistfed::roc_auc(tied, labels).auc == doctest::Approx(0.5));

    // positives {0.9, 0.6} vs negatives {0.7, 0.2}: 3 of 4 pairs ordered
    const std::vector<double> scores{0.9, 0.7, 0.6, 0.2};
    const std::vector<int> y{1, 0, 1, 0};
    CHECK(mistfed::roc_auc(scores, y).auc == doctest::Approx(0.75));
}

TEST_CASE("roc requires both classes") {
    const std::vector<double> scores{0.1, 0.9};
    const std::vector<int> ones{1, 1};
    CHECK_THROWS_AS(mistfed::roc_auc(scores, ones), mistfed::UsageError);
}

TEST_CASE("roc points are sorted by FPR and anchored at (0,0)") {
    RngStream rng(7);
    std::vector<double> scores(40);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = rng.next_double();
        labels[i] = rng.next_below(2) ? 1 : 0;
    }
    const auto curve = mistfed::roc_auc(scores, labels);
    CHECK(curve.points.front().x == 0.0);
    CHECK(curve.points.front().y == 0.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].x >= curve.points[i - 1].x);
    }
    CHECK(curve.points.back().x == doctest::Approx(1.0));
    CHECK(curve.points.back().y == doctest::Approx(1.0));
}

TEST_CASE("trapezoidal AUC equals the pairwise statistic on small tied sets") {
    RngStream rng(1001);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.next_below(11);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = 0.1 * static_cast<double>(rng.next_below(6));  // force ties
            labels[i] = rng.next_below(2) ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        const double expected = pairwise_auc(scores, labels);
        CHECK(std::abs(mistfed::roc_auc(scores, labels).auc - expected) <= 1e-12);
    }
}

TEST_CASE("pr: perfect ranking and the worked average-precision case") {
    const std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels{1, 1, 0, 0};
    CHECK(mistfed::pr_auc(perfect, labels).auc == doctest::Approx(1.0));

    // thresholds 0.9 -> (R=1/2, P=1), 0.6 -> (R=1, P=2/3); AP = 1/2 + 1/2 * 2/3
    const std::vector<double> scores{0.9, 0.7, 0.6, 0.2};
    const std::vector<int> y{1, 0, 1, 0};
    const double ap = mistfed::pr_auc(scores, y).auc;
    CHECK(std::abs(ap - (0.5 + 0.5 * (2.0 / 3.0))) <= 1e-15);
}

TEST_CASE("pr requires a positive sample and recall grid is monotone") {
    const std::vector<double> scores{0.1, 0.9};
    const std::vector<int> zeros{0, 0};
    CHECK_THROWS_AS(mistfed::pr_auc(scores, zeros), mistfed::UsageError);

    RngStream rng(17);
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = 0.25 * static_cast<double>(rng.next_below(5));
        y[i] = rng.next_below(3) == 0 ? 1 : 0;
    }
    y[0] = 1;
    const auto curve = mistfed::pr_auc(s, y);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].x >= curve.points[i - 1].x);
    }
}

TEST_CASE("average precision of random scores approaches the positive rate") {
    RngStream rng(4242);
    const std::size_t n = 10000;
    const double rate = 0.3;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.next_double();
        labels[i] = rng.next_double() < rate ? 1 : 0;
    }
    CHECK(mistfed::pr_auc(scores, labels).auc == doctest::Approx(rate).epsilon(0.05 / rate));
}

TEST_CASE("metrics are invariant under sample reordering") {
    RngStream rng(88);
    std::vector<double> scores(64);
    std::vector<int> labels(64);
    std::vector<int> preds(64);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] = 0.2 * static_cast<double>(rng.next_below(6));
        labels[i] = rng.next_below(2) ? 1 : 0;
        preds[i] = rng.next_below(2) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<std::size_t> perm(scores.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<double> ps(scores.size());
    std::vector<int> pl(labels.size()), pp(preds.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        ps[i] = scores[perm[i]];
        pl[i] = labels[perm[i]];
        pp[i] = preds[perm[i]];
    }
    CHECK(mistfed::roc_auc(scores, labels).auc ==
          doctest::Approx(mistfed::roc_auc(ps, pl).auc).epsilon(1e-14));
    CHECK(mistfed::pr_auc(scores, labels).auc ==
          doctest::Approx(mistfed::pr_auc(ps, pl).auc).epsilon(1e-14));
    const auto a = mistfed::classification_metrics(preds, labels, 1);
    const auto b = mistfed::classification_metrics(pp, pl, 1);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.f1 == b.f1);
}

TEST_CASE("drift: worked values, degenerate reference, and order statistics") {
    const ParamVector ref{6.0, 8.0};  // norm 10
    const ParamVector w{9.0, 12.0};   // w - ref = (3, 4), norm 5
    const std::vector<ParamVector> models{w};
    const auto d = mistfed::model_drift(models, ref);
    CHECK(d.per_client[0] == doctest::Approx(0.5));

    const std::vector<ParamVector> same{ref, ref, ref};
    const auto zero = mistfed::model_drift(same, ref);
    CHECK(zero.mean == 0.0);
    CHECK(zero.median == 0.0);

    const ParamVector origin{0.0};
    const std::vector<ParamVector> one{ParamVector{1.0}};
    CHECK(mistfed::model_drift(one, origin).per_client[0] == doctest::Approx(1e12));

    const std::vector<ParamVector> three{ParamVector{6.0 + 1.0, 8.0}, ParamVector{6.0, 8.0 + 2.0},
                                         ParamVector{6.0 + 3.0, 8.0}};
    const auto stats = mistfed::model_drift(three, ref);
    CHECK(stats.mean == doctest::Approx(0.2));
    CHECK(stats.median == doctest::Approx(0.2));
}

TEST_CASE("runtime stats") {
    const std::vector<double> single{2.5};
    auto s = mistfed::runtime_stats(single);
    CHECK(s.mean == 2.5);
    CHECK(s.median == 2.5);

    const std::vector<double> four{1.0, 2.0, 3.0, 100.0};
    s = mistfed::runtime_stats(four);
    CHECK(s.mean == doctest::Approx(26.5));
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.min == 1.0);
    CHECK(s.max == 100.0);

    const std::vector<double> none;
    CHECK_THROWS_AS(mistfed::runtime_stats(none), mistfed::UsageError);
}

TEST_CASE("curve CSV has a header and one row per point") {
    const std::vector<double> scores{0.9, 0.7, 0.6, 0.2};
    const std::vector<int> y{1, 0, 1, 0};
    const auto curve = mistfed::roc_auc(scores, y);
    std::ostringstream out;
    mistfed::write_curve_csv(out, curve.points);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "threshold,x,y");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == curve.points.size());
}
