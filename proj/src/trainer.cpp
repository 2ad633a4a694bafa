#include "bbdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "bbdm/csv.hpp"

namespace bbdm {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + field + " " + what);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::filesystem::path step_checkpoint_path(const std::filesystem::path& dir, std::int64_t step) {
    return dir / ("checkpoint_" + std::to_string(step) + ".bbdm");
}

// Keeps the header and rows with step <= last_step.
void truncate_metrics(const std::filesystem::path& path, std::int64_t last_step) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("resume: missing metrics log " + path.string());
    std::ostringstream kept;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            kept << line << '\n';
            first = false;
            continue;
        }
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (std::stoll(line.substr(0, comma)) <= last_step) kept << line << '\n';
    }
    in.close();
    std::ofstream out(path, std::ios::trunc);
    out << kept.str();
}

void check_compatible(const TrainConfig& cfg, const Checkpoint& c, Eigen::Index dim) {
    if (c.num_steps != cfg.num_steps || c.scale != cfg.scale) throw std::invalid_argument("resume: schedule (T, s) differs");
    if (c.mlp.data_dim != dim || c.mlp.hidden != cfg.mlp.hidden || c.mlp.embed_dim != cfg.mlp.embed_dim ||
        c.mlp.max_period != cfg.mlp.max_period) {
        throw std::invalid_argument("resume: architecture differs");
    }
    if (c.seed != cfg.require_seed()) throw std::invalid_argument("resume: seed differs");
}

}  // namespace

void TrainConfig::validate() const {
    require(num_steps >= 2, "T", "must be >= 2");
    require(std::isfinite(scale) && scale > 0.0, "s", "must be positive");
    require(batch_size >= 1, "batch_size", "must be positive");
    require(max_steps >= 0, "max_steps", "must be >= 0");
    require(seed.has_value(), "seed", "is required");
    mlp.validate();
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
    require(adam_eps > 0.0, "adam_eps", "must be positive");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay", "must lie in [0, 1)");
    require(ema_start >= 0, "ema_start", "must be >= 0");
    require(ema_interval >= 1, "ema_interval", "must be positive");
    require(lr_min > 0.0 && lr_min <= lr_max, "lr_min", "must satisfy 0 < lr_min <= lr_max");
    require(lr_factor > 0.0 && lr_factor < 1.0, "lr_factor", "must lie in (0, 1)");
    require(lr_patience >= 0, "lr_patience", "must be >= 0");
    require(lr_cooldown >= 0, "lr_cooldown", "must be >= 0");
    require(lr_threshold >= 0.0, "lr_threshold", "must be >= 0");
    require(checkpoint_interval >= 0, "checkpoint_interval", "must be >= 0");
    require(validation_interval >= 1, "validation_interval", "must be positive");
    require(log_interval >= 1, "log_interval", "must be positive");
    require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction", "must lie in [0, 1)");
}

std::uint64_t TrainConfig::require_seed() const {
    if (!seed) throw std::invalid_argument("config: seed is required");
    return *seed;
}

TrainingBatch make_training_batch(const BridgeSchedule& schedule, const Matrix& x0, const Matrix& y,
                                  LossWeighting weighting, Rng& rng) {
    if (x0.rows() == 0) throw std::invalid_argument("train_step: empty batch");
    if (x0.rows() != y.rows() || x0.cols() != y.cols()) throw std::invalid_argument("train_step: x0/y shape mismatch");
    const Eigen::Index n = x0.rows(), d = x0.cols();
    const int T = schedule.num_steps();
    TrainingBatch b;
    b.x_t.resize(n, d);
    b.target.resize(n, d);
    b.t.resize(static_cast<std::size_t>(n));
    b.weights.resize(n);
    StateVector eps(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int t = static_cast<int>(rng.uniform_int(1, T));
        rng.fill_normal(eps);
        const StateVector xi = x0.row(i).transpose(), yi = y.row(i).transpose();
        b.x_t.row(i) = forward_sample(schedule, xi, yi, t, eps).transpose();
        b.target.row(i) = loss_target(schedule, xi, yi, t, eps).transpose();
        b.t[static_cast<std::size_t>(i)] = t;
        b.weights[i] = loss_weight(schedule, t, weighting);
    }
    return b;
}

double train_step(NoisePredictor& model, AdamState& adam, const BridgeSchedule& schedule, const Matrix& x0,
                  const Matrix& y, Rng& rng, double lr, LossWeighting weighting) {
    const TrainingBatch batch = make_training_batch(schedule, x0, y, weighting, rng);
    const GradResult g = model.grad(batch, schedule.num_steps());
    if (!all_finite(g.grads)) throw std::runtime_error("non-finite gradient");
    adam_step(model.mutable_params(), g.grads, adam, lr);
    return g.loss;
}

Eigen::Index validation_rows(Eigen::Index n, double val_fraction) {
    if (val_fraction <= 0.0 || n < 2) return 0;
    const auto k = static_cast<Eigen::Index>(std::floor(val_fraction * static_cast<double>(n)));
    return std::clamp<Eigen::Index>(k, 1, n - 1);
}

Validator::Validator(const BridgeSchedule& schedule, const Matrix& x0, const Matrix& y, std::uint64_t seed)
    : num_steps_(schedule.num_steps()) {
    const int T = schedule.num_steps();
    std::vector<int> grid;
    for (int k = 1; k <= 9; ++k) {
        const int t = std::clamp(static_cast<int>(std::lround(k * T / 10.0)), 1, T);
        if (grid.empty() || grid.back() != t) grid.push_back(t);
    }
    const Eigen::Index n = x0.rows(), d = x0.cols();
    const auto rows = n * static_cast<Eigen::Index>(grid.size());
    batch_.x_t.resize(rows, d);
    batch_.target.resize(rows, d);
    batch_.weights = Eigen::VectorXd::Ones(rows);
    Rng rng(seed, "validation");
    StateVector eps(d);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const StateVector xi = x0.row(i).transpose(), yi = y.row(i).transpose();
        for (int t : grid) {
            rng.fill_normal(eps);
            batch_.x_t.row(r) = forward_sample(schedule, xi, yi, t, eps).transpose();
            batch_.target.row(r) = loss_target(schedule, xi, yi, t, eps).transpose();
            batch_.t.push_back(t);
            ++r;
        }
    }
}

double Validator::loss(const NoisePredictor& model) const {
    if (empty()) throw std::logic_error("validator: no validation rows");
    const Matrix pred = model.forward(batch_.x_t, batch_.t, num_steps_);
    return (pred - batch_.target).array().square().mean();
}

Checkpoint initial_checkpoint(const TrainConfig& cfg, Eigen::Index data_dim) {
    cfg.validate();
    Checkpoint c;
    c.num_steps = cfg.num_steps;
    c.scale = cfg.scale;
    c.mlp = cfg.mlp;
    c.mlp.data_dim = data_dim;
    c.seed = cfg.require_seed();
    c.step = 0;
    NoisePredictor model(c.mlp, c.seed);
    c.params = model.params();
    c.adam = make_adam_state(c.params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    c.ema = make_ema_state(c.params, cfg.ema_decay, cfg.ema_start, cfg.ema_interval);
    auto& p = c.plateau;
    p.current_lr = p.max_lr = cfg.lr_max;
    p.min_lr = cfg.lr_min;
    p.factor = cfg.lr_factor;
    // The scheduler sees one observation per validation pass.
    p.patience = ceil_div(cfg.lr_patience, cfg.validation_interval);
    p.cooldown = ceil_div(cfg.lr_cooldown, cfg.validation_interval);
    p.threshold = cfg.lr_threshold;
    p.validate();
    return c;
}

TrainResult run_training(const TrainConfig& cfg, const PairedDataset& data, const std::filesystem::path& out_dir,
                         const std::optional<Checkpoint>& resume) {
    cfg.validate();
    data.validate();
    const std::uint64_t seed = cfg.require_seed();
    const BridgeSchedule schedule(cfg.num_steps, cfg.scale);
    std::filesystem::create_directories(out_dir);

    const Eigen::Index n_val = validation_rows(data.size(), cfg.val_fraction);
    const Eigen::Index n_train = data.size() - n_val;
    const Matrix train_x0 = data.x0.topRows(n_train), train_y = data.y.topRows(n_train);
    std::optional<Validator> validator;
    if (n_val > 0) validator.emplace(schedule, data.x0.bottomRows(n_val), data.y.bottomRows(n_val), seed);

    Checkpoint state;
    TrainResult result;
    result.metrics_path = out_dir / "metrics.csv";
    if (resume) {
        check_compatible(cfg, *resume, data.dim());
        state = *resume;
        truncate_metrics(result.metrics_path, state.step);
    } else {
        state = initial_checkpoint(cfg, data.dim());
        std::ofstream(result.metrics_path, std::ios::trunc) << "step,loss,lr,val_loss\n";
    }
    std::ofstream log(result.metrics_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot open " + result.metrics_path.string() + " for writing");

    NoisePredictor model(state.mlp, state.params);
    Matrix bx0(cfg.batch_size, data.dim()), by(cfg.batch_size, data.dim());
    while (state.step < cfg.max_steps) {
        const std::int64_t step = state.step + 1;
        const auto ustep = static_cast<std::uint64_t>(step);
        Rng data_rng(seed, "data", ustep);
        for (int i = 0; i < cfg.batch_size; ++i) {
            const auto row = static_cast<Eigen::Index>(data_rng.uniform_int(0, n_train - 1));
            bx0.row(i) = train_x0.row(row);
            by.row(i) = train_y.row(row);
        }
        Rng noise_rng(seed, "noise", ustep);
        const double lr = state.plateau.current_lr;
        double loss = 0.0;
        try {
            loss = train_step(model, state.adam, schedule, bx0, by, noise_rng, lr, cfg.weighting);
        } catch (const std::runtime_error& e) {
            state.params = model.params();
            save_checkpoint(out_dir / "diverged.bbdm", state);
            throw TrainingDiverged(step, "training diverged at step " + std::to_string(step) + ": " + e.what());
        }
        state.step = step;
        ema_update(state.ema, model.params(), step);
        result.losses.push_back(loss);

        std::optional<double> val;
        if (validator && step % cfg.validation_interval == 0) {
            val = validator->loss(model);
            plateau_lr_step(state.plateau, *val);
            result.val_losses.emplace_back(step, *val);
        }
        if (step % cfg.log_interval == 0 || val) {
            log << step << ',' << format_double(loss) << ',' << format_double(lr) << ','
                << (val ? format_double(*val) : "") << '\n';
        }
        if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
            state.params = model.params();
            log.flush();
            save_checkpoint(step_checkpoint_path(out_dir, step), state);
        }
    }
    log.flush();
    if (!log) throw std::runtime_error("write failed for " + result.metrics_path.string());
    state.params = model.params();
    result.checkpoint_path = out_dir / "model.bbdm";
    save_checkpoint(result.checkpoint_path, state);
    result.final_state = std::move(state);
    return result;
}

}  // namespace bbdm
