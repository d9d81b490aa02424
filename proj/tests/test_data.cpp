#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "mistfed/data.hpp"
#include "mistfed/model.hpp"

using mistfed::ClientDataset;
using mistfed::ModalityKind;
using mistfed::ModalitySpec;
using mistfed::PartitionConfig;
using mistfed::PooledDataset;
using mistfed::RawSample;
using mistfed::RngStream;
using mistfed::SkewMode;
using mistfed::SyntheticSpec;

namespace {

SyntheticSpec small_spec(std::size_t samples = 120, double separation = 4.0) {
    auto spec = SyntheticSpec::defaults();
    spec.samples_per_modality = samples;
    spec.class_separation = separation;
    return spec;
}

SyntheticSpec single_modality_spec(std::size_t samples, double separation) {
    SyntheticSpec spec;
    spec.modalities = {{"telemetry", 8, ModalityKind::telemetry}};
    spec.samples_per_modality = samples;
    spec.class_separation = separation;
    spec.corrupt_fraction = 0.0;
    return spec;
}

// Quick centralized accuracy probe: trains a logistic head on raw features.
double pooled_train_accuracy(const PooledDataset& pooled) {
    const auto& block = pooled.blocks.front();
    mistfed::MlpConfig cfg;
    cfg.input_dim = block.modality.raw_dim;
    cfg.hidden_dims = {};
    cfg.num_classes = pooled.num_classes;
    cfg.dropout_rate = 0.0;
    std::vector<mistfed::Example> examples;
    for (const auto& s : block.samples) examples.push_back({s.x, s.label});
    RngStream rng(77);
    auto params = mistfed::init_params(cfg, rng);
    mistfed::TrainHyper hyper;
    hyper.mu = 0.0;
    hyper.local_epochs = 30;
    hyper.batch_size = 32;
    hyper.learning_rate = 0.05;
    const auto update = mistfed::local_train(params, params, cfg, hyper, examples, rng, 0);
    params += update.delta;
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        const auto probs = mistfed::forward(params, cfg, ex.features);
        const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                          probs.begin());
        hits += pred == ex.label ? 1u : 0u;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

}  // namespace

TEST_CASE("synthetic generation is seed-deterministic and label-balanced") {
    const auto spec = small_spec();
    const auto a = mistfed::generate_synthetic(spec, RngStream(42));
    const auto b = mistfed::generate_synthetic(spec, RngStream(42));
    REQUIRE(a.blocks.size() == 3);
    CHECK(a.total_samples() == 360);
    for (std::size_t m = 0; m < a.blocks.size(); ++m) {
        REQUIRE(a.blocks[m].samples.size() == b.blocks[m].samples.size());
        for (std::size_t s = 0; s < a.blocks[m].samples.size(); ++s) {
            CHECK(a.blocks[m].samples[s].x == b.blocks[m].samples[s].x);
            CHECK(a.blocks[m].samples[s].label == b.blocks[m].samples[s].label);
        }
        std::map<int, int> per_class;
        for (const auto& s : a.blocks[m].samples) per_class[s.label] += 1;
        CHECK(per_class[0] == 60);
        CHECK(per_class[1] == 60);
    }
    CHECK(a.label_mapping.at("normal") == 0);
    CHECK(a.label_mapping.at("attack") == 1);
}

TEST_CASE("corruption marks the configured fraction invalid") {
    auto spec = small_spec(200);
    spec.corrupt_fraction = 0.05;
    const auto pooled = mistfed::generate_synthetic(spec, RngStream(1));
    for (const auto& block : pooled.blocks) {
        std::size_t invalid = 0;
        for (const auto& s : block.samples) invalid += s.valid ? 0u : 1u;
        CHECK(invalid == 10);  // 5% of 200
    }
}

TEST_CASE("zero separation is indistinguishable, large separation is separable") {
    const auto blurred = mistfed::generate_synthetic(single_modality_spec(600, 0.0), RngStream(5));
    CHECK(pooled_train_accuracy(blurred) == doctest::Approx(0.5).epsilon(0.1));

    const auto split = mistfed::generate_synthetic(single_modality_spec(600, 10.0), RngStream(5));
    CHECK(pooled_train_accuracy(split) >= 0.99);
}

TEST_CASE("generate_synthetic input validation") {
    auto spec = small_spec();
    spec.samples_per_modality = 1;
    CHECK_THROWS_AS(mistfed::generate_synthetic(spec, RngStream(1)), mistfed::UsageError);
    spec = small_spec();
    spec.class_separation = -1.0;
    CHECK_THROWS_AS(mistfed::generate_synthetic(spec, RngStream(1)), mistfed::UsageError);
    spec = small_spec();
    spec.corrupt_fraction = 1.0;
    CHECK_THROWS_AS(mistfed::generate_synthetic(spec, RngStream(1)), mistfed::UsageError);
}

TEST_CASE("a single client holds the entire single-modality pool") {
    const auto pooled = mistfed::generate_synthetic(single_modality_spec(50, 2.0), RngStream(2));
    PartitionConfig pcfg;
    pcfg.num_clients = 1;
    const auto clients = mistfed::partition_non_iid(pooled, pcfg, RngStream(3));
    REQUIRE(clients.size() == 1);
    CHECK(clients[0].n() == 50);
    CHECK(clients[0].validation.size() == 10);  // floor(0.2 * 50)
    CHECK(clients[0].train.size() == 40);
}

TEST_CASE("by_source_type round-robins modalities over clients") {
    const auto pooled = mistfed::generate_synthetic(small_spec(60), RngStream(4));
    PartitionConfig pcfg;
    pcfg.num_clients = 6;
    pcfg.skew_mode = SkewMode::by_source_type;
    const auto clients = mistfed::partition_non_iid(pooled, pcfg, RngStream(5));
    std::map<std::string, int> holders;
    for (const auto& c : clients) holders[c.modality.modality_id] += 1;
    REQUIRE(holders.size() == 3);
    for (const auto& [id, count] : holders) CHECK(count == 2);
    // union is exact: per modality, client totals sum to the block size
    std::map<std::string, std::size_t> totals;
    for (const auto& c : clients) totals[c.modality.modality_id] += c.n();
    for (const auto& [id, total] : totals) CHECK(total == 60);
}

TEST_CASE("partitioning is a true partition with deterministic splits") {
    const auto pooled = mistfed::generate_synthetic(small_spec(90), RngStream(6));
    PartitionConfig pcfg;
    pcfg.num_clients = 9;
    pcfg.skew_mode = SkewMode::dirichlet;
    pcfg.dirichlet_alpha = 0.3;
    const auto a = mistfed::partition_non_iid(pooled, pcfg, RngStream(7));
    const auto b = mistfed::partition_non_iid(pooled, pcfg, RngStream(7));
    std::size_t total = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        total += a[c].n();
        CHECK(a[c].n() >= 1);
        CHECK(a[c].validation.size() ==
              static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(a[c].n()))));
        REQUIRE(a[c].train.size() == b[c].train.size());
        for (std::size_t s = 0; s < a[c].train.size(); ++s) {
            CHECK(a[c].train[s].x == b[c].train[s].x);
        }
    }
    CHECK(total == pooled.total_samples());
}

TEST_CASE("dirichlet with huge alpha approaches the global class mix") {
    const auto pooled = mistfed::generate_synthetic(single_modality_spec(2000, 1.0), RngStream(8));
    PartitionConfig pcfg;
    pcfg.num_clients = 8;
    pcfg.skew_mode = SkewMode::dirichlet;
    pcfg.dirichlet_alpha = 1e6;
    const auto clients = mistfed::partition_non_iid(pooled, pcfg, RngStream(9));
    for (const auto& c : clients) {
        std::size_t positive = 0;
        for (const auto& s : c.train) positive += s.label == 1 ? 1u : 0u;
        for (const auto& s : c.validation) positive += s.label == 1 ? 1u : 0u;
        const double share = static_cast<double>(positive) / static_cast<double>(c.n());
        CHECK(std::abs(share - 0.5) < 0.05);
    }
}

TEST_CASE("starved clients get one sample reassigned from the largest") {
    // extreme skew with as many clients as will often starve some draw
    const auto pooled = mistfed::generate_synthetic(single_modality_spec(24, 1.0), RngStream(10));
    PartitionConfig pcfg;
    pcfg.num_clients = 12;
    pcfg.skew_mode = SkewMode::dirichlet;
    pcfg.dirichlet_alpha = 0.05;
    const auto clients = mistfed::partition_non_iid(pooled, pcfg, RngStream(11));
    std::size_t total = 0;
    for (const auto& c : clients) {
        CHECK(c.n() >= 1);
        total += c.n();
    }
    CHECK(total == 24);
}

TEST_CASE("multi-modality pools require at least one client per modality") {
    const auto pooled = mistfed::generate_synthetic(small_spec(30), RngStream(12));
    PartitionConfig pcfg;
    pcfg.num_clients = 2;  // 3 modalities
    CHECK_THROWS_AS(mistfed::partition_non_iid(pooled, pcfg, RngStream(13)),
                    mistfed::ConfigError);
}

TEST_CASE("data quality worked examples") {
    ClientDataset ds;
    ds.client_id = 0;
    ds.modality = {"m", 1, ModalityKind::telemetry};

    // all valid, 16 evenly spread values over 16 bins -> Q = 1
    for (int i = 0; i < 16; ++i) {
        RawSample s;
        s.x = {static_cast<double>(i)};
        ds.train.push_back(s);
    }
    CHECK(mistfed::data_quality(ds, 16) == doctest::Approx(1.0).epsilon(1e-12));

    // two distinct values over two bins -> binary entropy 1 -> Q = 1
    ClientDataset two;
    two.modality = ds.modality;
    for (int i = 0; i < 8; ++i) {
        RawSample s;
        s.x = {i % 2 == 0 ? 0.0 : 1.0};
        two.train.push_back(s);
    }
    CHECK(mistfed::data_quality(two, 2) == doctest::Approx(1.0).epsilon(1e-12));

    // constant feature: entropy term 0 -> Q = 0.5 with all-valid samples
    ClientDataset flat;
    flat.modality = ds.modality;
    for (int i = 0; i < 8; ++i) {
        RawSample s;
        s.x = {3.0};
        flat.train.push_back(s);
    }
    CHECK(mistfed::data_quality(flat, 2) == doctest::Approx(0.5).epsilon(1e-12));

    // all invalid and constant -> 0
    ClientDataset worst = flat;
    for (auto& s : worst.train) s.valid = false;
    CHECK(mistfed::data_quality(worst, 2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("data quality is bounded and order-invariant") {
    const auto pooled = mistfed::generate_synthetic(small_spec(80), RngStream(14));
    PartitionConfig pcfg;
    pcfg.num_clients = 4;
    auto clients = mistfed::partition_non_iid(pooled, pcfg, RngStream(15));
    for (auto& c : clients) {
        const double q = mistfed::data_quality(c, 16);
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
        auto shuffledTrain = c.train;
        std::reverse(shuffledTrain.begin(), shuffledTrain.end());
        ClientDataset r = c;
        r.train = shuffledTrain;
        CHECK(mistfed::data_quality(r, 16) == doctest::Approx(q).epsilon(1e-12));
    }
    ClientDataset empty;
    empty.modality = {"m", 1, ModalityKind::telemetry};
    CHECK_THROWS_AS(mistfed::data_quality(empty, 16), mistfed::UsageError);
    CHECK_THROWS_AS(mistfed::data_quality(clients[0], 1), mistfed::UsageError);
}
