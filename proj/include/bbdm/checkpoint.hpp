#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bbdm/noise_predictor.hpp"
#include "bbdm/optim.hpp"

namespace bbdm {

/// Everything needed to continue training or to sample.
///
/// On-disk layout (all integers and doubles little-endian, doubles as IEEE-754 bits):
///
///   "BBDMCKPT"                      8 bytes
///   version                         u32 (currently 1)
///   T                               i32
///   s                               f64
///   data_dim, embed_dim             i64, i32
///   max_period                      f64
///   hidden count, sizes             u32, i32 * count
///   seed, step                      u64, i64
///   params                          tensor list
///   adam beta1, beta2, eps, step    f64 * 3, i64
///   adam m, adam v                  tensor list * 2
///   ema decay, start, interval      f64, i64, i64
///   ema primed                      u8
///   ema shadow                      tensor list
///   plateau lr/max/min/factor       f64 * 4
///   plateau patience, cooldown      i64 * 2
///   plateau threshold, best         f64 * 2
///   plateau has_best                u8
///   plateau bad, cooldown_left, n   i64 * 3
///   crc32 of all preceding bytes    u32
///
/// A tensor list is a u32 count followed by, per tensor, u32 rows, u32 cols and
/// rows*cols f64 values in column-major order.
struct Checkpoint {
    int num_steps = 0;
    double scale = 0.0;
    MlpConfig mlp;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::vector<Matrix> params;
    AdamState adam;
    EmaState ema;
    PlateauLrState plateau;

    /// EMA shadow once it has been primed, raw parameters otherwise.
    const std::vector<Matrix>& inference_params() const { return ema.primed ? ema.shadow : params; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file in the same directory and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bbdm
