#include "doctest.h"

#include <cmath>
#include <vector>

#include "mistfed/encoder.hpp"

using mistfed::EncoderParams;
using mistfed::ModalityKind;
using mistfed::ModalitySpec;
using mistfed::Nonlinearity;
using mistfed::ParamVector;
using mistfed::RngStream;

namespace {

EncoderParams identity_encoder(std::size_t d) {
    EncoderParams enc;
    enc.modality_id = "identity";
    enc.raw_dim = d;
    enc.k = d;
    enc.nonlinearity = Nonlinearity::identity;
    ParamVector w(d * d + d);
    for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
    enc.weights = w;
    return enc;
}

std::vector<std::vector<double>> gaussian_cloud(std::size_t n, std::size_t d, RngStream& rng) {
    std::vector<std::vector<double>> data(n);
    for (auto& x : data) x = rng.gaussians(d);
    return data;
}

}  // namespace

TEST_CASE("identity-configured encoder is the identity map") {
    const auto enc = identity_encoder(3);
    const std::vector<double> x{0.5, -1.25, 2.0};
    CHECK(mistfed::encode(enc, x) == x);
}

TEST_CASE("zero input returns the activated bias") {
    EncoderParams enc;
    enc.modality_id = "m";
    enc.raw_dim = 2;
    enc.k = 2;
    enc.nonlinearity = Nonlinearity::tanh;
    ParamVector w(2 * 2 + 2);
    w[4] = 0.3;
    w[5] = -0.8;
    enc.weights = w;
    const std::vector<double> zero{0.0, 0.0};
    const auto z = mistfed::encode(enc, zero);
    CHECK(z[0] == doctest::Approx(std::tanh(0.3)).epsilon(1e-15));
    CHECK(z[1] == doctest::Approx(std::tanh(-0.8)).epsilon(1e-15));
}

TEST_CASE("2->3 affine map matches hand evaluation") {
    EncoderParams enc;
    enc.modality_id = "m";
    enc.raw_dim = 2;
    enc.k = 3;
    enc.nonlinearity = Nonlinearity::identity;
    // W = [[1, 2], [3, 4], [5, 6]], b = [0.1, 0.2, 0.3]
    enc.weights = ParamVector{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.1, 0.2, 0.3};
    const std::vector<double> x{0.5, -0.25};
    const auto z = mistfed::encode(enc, x);
    CHECK(z[0] == doctest::Approx(1.0 * 0.5 + 2.0 * -0.25 + 0.1).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(3.0 * 0.5 + 4.0 * -0.25 + 0.2).epsilon(1e-12));
    CHECK(z[2] == doctest::Approx(5.0 * 0.5 + 6.0 * -0.25 + 0.3).epsilon(1e-12));
}

TEST_CASE("encode validates dimensions and finiteness") {
    const auto enc = identity_encoder(2);
    const std::vector<double> wrong{1.0};
    CHECK_THROWS_AS(mistfed::encode(enc, wrong), mistfed::ConfigError);
    const std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(mistfed::encode(enc, bad), mistfed::DataError);
}

TEST_CASE("pretraining memorizes a single repeated point") {
    const ModalitySpec modality{"telemetry", 3, ModalityKind::telemetry};
    std::vector<std::vector<double>> data(16, std::vector<double>{0.4, -0.2, 0.9});
    const auto enc = mistfed::pretrain_encoder(modality, data, 3, 200, RngStream(1));
    CHECK(mistfed::reconstruction_loss(enc, data) < 1e-4);
}

TEST_CASE("linear autoencoder with k = d reaches near-zero loss") {
    const ModalitySpec modality{"m", 2, ModalityKind::telemetry};
    RngStream rng(2);
    const auto data = gaussian_cloud(64, 2, rng);
    const auto enc =
        mistfed::pretrain_encoder(modality, data, 2, 400, RngStream(3), Nonlinearity::identity);
    CHECK(mistfed::reconstruction_loss(enc, data) < 1e-3);
}

TEST_CASE("pretraining never ends worse than it started") {
    const ModalitySpec modality{"m", 4, ModalityKind::network_flow};
    RngStream rng(4);
    const auto data = gaussian_cloud(40, 4, rng);
    for (const int epochs : {0, 1, 7}) {
        // entry loss of the same seeded initialization
        const auto entry = mistfed::pretrain_encoder(modality, data, 3, 0, RngStream(5));
        const auto exit = mistfed::pretrain_encoder(modality, data, 3, epochs, RngStream(5));
        CHECK(mistfed::reconstruction_loss(exit, data) <=
              mistfed::reconstruction_loss(entry, data) + 1e-12);
    }
}

TEST_CASE("pretrain rejects empty or mismatched data") {
    const ModalitySpec modality{"m", 2, ModalityKind::telemetry};
    const std::vector<std::vector<double>> empty;
    CHECK_THROWS_AS(mistfed::pretrain_encoder(modality, empty, 2, 5, RngStream(1)),
                    mistfed::UsageError);
    const std::vector<std::vector<double>> wrong{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(mistfed::pretrain_encoder(modality, wrong, 2, 5, RngStream(1)),
                    mistfed::ConfigError);
}

TEST_CASE("all modalities land in the same k-dimensional space") {
    RngStream rng(6);
    const std::vector<ModalitySpec> modalities{
        {"telemetry", 8, ModalityKind::telemetry},
        {"network_flow", 16, ModalityKind::network_flow},
        {"system_log", 12, ModalityKind::system_log_numeric},
    };
    const std::size_t k = 5;
    for (const auto& m : modalities) {
        const auto data = gaussian_cloud(24, m.raw_dim, rng);
        const auto enc = mistfed::pretrain_encoder(m, data, k, 10, rng.split(m.raw_dim));
        CHECK(mistfed::encode(enc, data.front()).size() == k);
    }
}

TEST_CASE("finetune with zero steps or empty shots returns the encoder unchanged") {
    const ModalitySpec modality{"m", 3, ModalityKind::telemetry};
    RngStream rng(7);
    const auto data = gaussian_cloud(20, 3, rng);
    const auto enc = mistfed::pretrain_encoder(modality, data, 2, 20, RngStream(8));

    const auto same = mistfed::finetune_encoder(enc, data, 0, RngStream(9));
    CHECK(same.encoder.weights == enc.weights);
    CHECK_FALSE(same.empty_shots_warning);

    const std::vector<std::vector<double>> none;
    const auto warned = mistfed::finetune_encoder(enc, none, 5, RngStream(9));
    CHECK(warned.encoder.weights == enc.weights);
    CHECK(warned.empty_shots_warning);
}

TEST_CASE("finetuning on the pretraining data cannot increase its loss") {
    const ModalitySpec modality{"m", 3, ModalityKind::telemetry};
    RngStream rng(10);
    const auto data = gaussian_cloud(30, 3, rng);
    const auto enc = mistfed::pretrain_encoder(modality, data, 2, 150, RngStream(11));
    const double before = mistfed::reconstruction_loss(enc, data);
    const auto tuned = mistfed::finetune_encoder(enc, data, 10, RngStream(12));
    CHECK(mistfed::reconstruction_loss(tuned.encoder, data) <= before + 1e-9);
    CHECK(mistfed::encode(tuned.encoder, data.front()).size() == enc.k);
}
