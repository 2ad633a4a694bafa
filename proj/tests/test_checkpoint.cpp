#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bbdm/checkpoint.hpp"
#include "bbdm/rng.hpp"

using namespace bbdm;

namespace {

std::vector<Matrix> perturbed(const std::vector<Matrix>& like, Rng& rng) {
    auto out = like;
    for (auto& m : out)
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 1e-3 + 1.0 / 3.0;
    return out;
}

Checkpoint sample_checkpoint() {
    Checkpoint c;
    c.num_steps = 100;
    c.scale = 0.7;
    c.mlp.data_dim = 2;
    c.mlp.hidden = {8, 5};
    c.mlp.embed_dim = 4;
    c.seed = 0xfeedfacecafebeefULL;
    c.step = 12345;
    NoisePredictor net(c.mlp, 3);
    Rng rng(4);
    c.params = perturbed(net.params(), rng);
    c.adam = make_adam_state(c.params);
    c.adam.step = 77;
    c.adam.m = perturbed(c.params, rng);
    c.adam.v = perturbed(c.params, rng);
    c.ema = make_ema_state(c.params, 0.995, 100, 16);
    c.ema.primed = true;
    c.ema.shadow = perturbed(c.params, rng);
    c.plateau.current_lr = 2.5e-5;
    c.plateau.best = 0.123456789;
    c.plateau.has_best = true;
    c.plateau.num_bad = 4;
    c.plateau.cooldown_left = 2;
    c.plateau.reductions = 2;
    return c;
}

void check_equal(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

}  // namespace

TEST_CASE("checkpoint round trip is lossless") {
    const auto c = sample_checkpoint();
    const auto bytes = encode_checkpoint(c);
    const auto d = decode_checkpoint(bytes);
    CHECK(d.num_steps == c.num_steps);
    CHECK(d.scale == c.scale);
    CHECK(d.mlp.hidden == c.mlp.hidden);
    CHECK(d.mlp.embed_dim == c.mlp.embed_dim);
    CHECK(d.mlp.data_dim == c.mlp.data_dim);
    CHECK(d.seed == c.seed);
    CHECK(d.step == c.step);
    check_equal(d.params, c.params);
    check_equal(d.adam.m, c.adam.m);
    check_equal(d.adam.v, c.adam.v);
    CHECK(d.adam.step == 77);
    check_equal(d.ema.shadow, c.ema.shadow);
    CHECK(d.ema.primed);
    CHECK(d.ema.start_step == 100);
    CHECK(d.plateau.current_lr == c.plateau.current_lr);
    CHECK(d.plateau.best == c.plateau.best);
    CHECK(d.plateau.num_bad == 4);
    CHECK(d.plateau.cooldown_left == 2);
    CHECK(d.plateau.reductions == 2);
    CHECK(encode_checkpoint(d) == bytes);
}

TEST_CASE("checkpoint byte order is fixed little-endian") {
    const auto bytes = encode_checkpoint(sample_checkpoint());
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "BBDMCKPT");
    CHECK(bytes[8] == 1);
    CHECK(bytes[9] == 0);
    CHECK(bytes[12] == 100);  // T
}

TEST_CASE("corrupted or truncated checkpoints are rejected") {
    auto bytes = encode_checkpoint(sample_checkpoint());
    auto flipped = bytes;
    flipped[100] ^= 0x01;
    CHECK_THROWS_AS(decode_checkpoint(flipped), std::runtime_error);
    auto cut = bytes;
    cut.resize(bytes.size() / 2);
    CHECK_THROWS_AS(decode_checkpoint(cut), std::runtime_error);
    auto version = bytes;
    version[8] = 9;
    CHECK_THROWS_AS(decode_checkpoint(version), std::runtime_error);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(magic), std::runtime_error);
}

TEST_CASE("checkpoint file save and load") {
    const auto dir = std::filesystem::temp_directory_path() / "bbdm_test_checkpoint";
    std::filesystem::create_directories(dir);
    const auto path = dir / "c.bbdm";
    const auto c = sample_checkpoint();
    save_checkpoint(path, c);
    CHECK_FALSE(std::filesystem::exists(dir / "c.bbdm.tmp"));
    const auto d = load_checkpoint(path);
    CHECK(encode_checkpoint(d) == encode_checkpoint(c));
    CHECK(&d.inference_params() == &d.ema.shadow);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.bbdm"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
