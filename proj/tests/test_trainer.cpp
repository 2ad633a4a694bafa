#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bbdm/gauss_oracle.hpp"
#include "bbdm/sampler.hpp"
#include "bbdm/trainer.hpp"

using namespace bbdm;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.num_steps = 50;
    cfg.batch_size = 16;
    cfg.max_steps = 40;
    cfg.seed = 77;
    cfg.mlp.hidden = {16, 16};
    cfg.mlp.embed_dim = 8;
    cfg.lr_max = 1e-3;
    cfg.ema_start = 10;
    cfg.ema_interval = 4;
    cfg.validation_interval = 10;
    cfg.lr_patience = 20;
    cfg.lr_cooldown = 10;
    cfg.checkpoint_interval = 20;
    return cfg;
}

PairedDataset small_data() {
    JointGaussianSpec spec;
    spec.corr = 0.8;
    return gen_joint_gaussian(spec, 1, 200, 5);
}

}  // namespace

TEST_CASE("training batch: t in 1..T and targets follow the bridge identity") {
    const BridgeSchedule sch(10, 1.0);
    Eigen::MatrixXd x0 = Eigen::MatrixXd::Constant(400, 2, 1.0), y = Eigen::MatrixXd::Constant(400, 2, 3.0);
    Rng rng(1);
    const auto b = make_training_batch(sch, x0, y, LossWeighting::kSimple, rng);
    int min_t = 100, max_t = 0;
    for (Eigen::Index i = 0; i < 400; ++i) {
        const int t = b.t[static_cast<std::size_t>(i)];
        min_t = std::min(min_t, t);
        max_t = std::max(max_t, t);
        CHECK((b.x_t.row(i) - b.target.row(i)).isApprox(x0.row(i)));
        if (t == 10) CHECK(b.target.row(i) == (y.row(i) - x0.row(i)));
    }
    CHECK(min_t == 1);
    CHECK(max_t == 10);
    CHECK(b.weights.isOnes(0.0));
}

TEST_CASE("first step loss with a zero output layer is the mean squared target") {
    const BridgeSchedule sch(30, 1.0);
    MlpConfig cfg;
    NoisePredictor net(cfg, 4);
    auto adam = make_adam_state(net.params());
    Eigen::MatrixXd x0(8, 1), y(8, 1);
    for (int i = 0; i < 8; ++i) {
        x0(i, 0) = 0.1 * i;
        y(i, 0) = -0.3 * i;
    }
    Rng a(9), b(9);
    const auto batch = make_training_batch(sch, x0, y, LossWeighting::kSimple, a);
    const double loss = train_step(net, adam, sch, x0, y, b, 1e-3);
    CHECK(loss == doctest::Approx(batch.target.array().square().mean()).epsilon(1e-15));
    CHECK(adam.step == 1);
}

TEST_CASE("run_training is a pure function of config, data and seed") {
    TempDir d1("bbdm_test_train_a"), d2("bbdm_test_train_b");
    const auto cfg = small_config();
    const auto data = small_data();
    const auto r1 = run_training(cfg, data, d1.path);
    const auto r2 = run_training(cfg, data, d2.path);
    CHECK(r1.losses == r2.losses);
    CHECK(slurp(r1.metrics_path) == slurp(r2.metrics_path));
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
    CHECK(r1.losses.size() == 40);
    CHECK(r1.val_losses.size() == 4);
    CHECK(std::filesystem::exists(d1.path / "checkpoint_20.bbdm"));
    CHECK(r1.final_state.ema.primed);

    auto other = cfg;
    other.seed = 78;
    TempDir d3("bbdm_test_train_c");
    CHECK(run_training(other, data, d3.path).losses != r1.losses);
}

TEST_CASE("resume continues exactly where an uninterrupted run goes") {
    TempDir full("bbdm_test_resume_full"), part("bbdm_test_resume_part");
    const auto cfg = small_config();
    const auto data = small_data();
    const auto uninterrupted = run_training(cfg, data, full.path);

    auto shorter = cfg;
    shorter.max_steps = 25;
    run_training(shorter, data, part.path);
    const auto resumed = run_training(cfg, data, part.path, load_checkpoint(part.path / "checkpoint_20.bbdm"));
    REQUIRE(resumed.losses.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(resumed.losses[i] == uninterrupted.losses[20 + i]);
    CHECK(slurp(resumed.metrics_path) == slurp(uninterrupted.metrics_path));
    CHECK(slurp(resumed.checkpoint_path) == slurp(uninterrupted.checkpoint_path));

    auto wrong = cfg;
    wrong.scale = 2.0;
    CHECK_THROWS_AS(run_training(wrong, data, part.path, load_checkpoint(part.path / "checkpoint_20.bbdm")),
                    std::invalid_argument);
}

TEST_CASE("zero max_steps writes only the initial checkpoint") {
    TempDir dir("bbdm_test_train_zero");
    auto cfg = small_config();
    cfg.max_steps = 0;
    const auto r = run_training(cfg, small_data(), dir.path);
    CHECK(r.losses.empty());
    CHECK(slurp(r.metrics_path) == "step,loss,lr,val_loss\n");
    const auto c = load_checkpoint(r.checkpoint_path);
    CHECK(c.step == 0);
    CHECK(c.params.back().isZero(0.0));
}

TEST_CASE("a diverging run stops and leaves a snapshot") {
    TempDir dir("bbdm_test_train_diverge");
    auto cfg = small_config();
    cfg.lr_max = 1e200;
    cfg.max_steps = 200;
    auto data = small_data();
    data.x0 *= 1e150;
    CHECK_THROWS_AS(run_training(cfg, data, dir.path), TrainingDiverged);
    CHECK(std::filesystem::exists(dir.path / "diverged.bbdm"));
}

TEST_CASE("config validation names the field") {
    auto cfg = small_config();
    cfg.seed.reset();
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("seed"), std::invalid_argument);
    cfg = small_config();
    cfg.batch_size = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("batch_size"), std::invalid_argument);
}

TEST_CASE("identity pairing learns to leave inputs near unchanged") {
    TempDir dir("bbdm_test_identity");
    auto cfg = small_config();
    cfg.num_steps = 20;
    cfg.scale = 0.05;
    cfg.max_steps = 1500;
    cfg.batch_size = 32;
    cfg.lr_max = 3e-3;
    cfg.ema_start = 1000;
    cfg.checkpoint_interval = 0;
    cfg.validation_interval = 100;
    JointGaussianSpec spec;
    spec.corr = 1.0;
    const auto data = gen_joint_gaussian(spec, 1, 500, 1);
    const auto r = run_training(cfg, data, dir.path);
    const NoisePredictor net(r.final_state.mlp, r.final_state.inference_params());
    const BridgeSchedule sch(cfg.num_steps, cfg.scale);
    Eigen::MatrixXd y(5, 1);
    y << -1.5, -0.5, 0.0, 0.7, 1.9;
    const auto out = ancestral_sample(sch, net, y, 3);
    const OracleEpsModel oracle(spec, sch, 1);
    const auto ideal = ancestral_sample(sch, oracle, y, 3);
    // The residual x0 - y is the chain's own injected noise; the learned chain follows the oracle one.
    CHECK((out.x0 - ideal.x0).cwiseAbs().maxCoeff() < 0.05);
    CHECK((out.x0 - y).cwiseAbs().maxCoeff() < 0.5);
}
