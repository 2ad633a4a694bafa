#include "bbdm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include <zlib.h>

namespace bbdm {

namespace {

constexpr char kMagic[8] = {'B', 'B', 'D', 'M', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }

    void tensors(const std::vector<Matrix>& ts) {
        u32(static_cast<std::uint32_t>(ts.size()));
        for (const auto& m : ts) {
            u32(static_cast<std::uint32_t>(m.rows()));
            u32(static_cast<std::uint32_t>(m.cols()));
            for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
        }
    }

    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_magic() {
        need(sizeof(kMagic));
        if (std::memcmp(data_ + pos_, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("checkpoint: bad magic");
        pos_ += sizeof(kMagic);
    }

    std::vector<Matrix> tensors() {
        const std::uint32_t count = u32();
        std::vector<Matrix> ts;
        for (std::uint32_t k = 0; k < count; ++k) {
            const std::uint32_t rows = u32(), cols = u32();
            const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
            need(n * 8);
            Matrix m(rows, cols);
            for (std::uint64_t i = 0; i < n; ++i) m.data()[i] = f64();
            ts.push_back(std::move(m));
        }
        return ts;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::uint64_t n) const {
        if (n > size_ - pos_) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);
    w.i32(c.num_steps);
    w.f64(c.scale);
    w.i64(c.mlp.data_dim);
    w.i32(c.mlp.embed_dim);
    w.f64(c.mlp.max_period);
    w.u32(static_cast<std::uint32_t>(c.mlp.hidden.size()));
    for (int h : c.mlp.hidden) w.i32(h);
    w.u64(c.seed);
    w.i64(c.step);
    w.tensors(c.params);

    w.f64(c.adam.beta1);
    w.f64(c.adam.beta2);
    w.f64(c.adam.eps);
    w.i64(c.adam.step);
    w.tensors(c.adam.m);
    w.tensors(c.adam.v);

    w.f64(c.ema.decay);
    w.i64(c.ema.start_step);
    w.i64(c.ema.update_interval);
    w.u8(c.ema.primed ? 1 : 0);
    w.tensors(c.ema.shadow);

    const auto& p = c.plateau;
    w.f64(p.current_lr);
    w.f64(p.max_lr);
    w.f64(p.min_lr);
    w.f64(p.factor);
    w.i64(p.patience);
    w.i64(p.cooldown);
    w.f64(p.threshold);
    w.f64(p.best);
    w.u8(p.has_best ? 1 : 0);
    w.i64(p.num_bad);
    w.i64(p.cooldown_left);
    w.i64(p.reductions);

    auto& bytes = w.bytes();
    w.u32(crc_of(bytes.data(), bytes.size()));
    return std::move(bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kMagic) + 8) throw std::runtime_error("checkpoint: truncated file");
    const std::size_t body = bytes.size() - 4;
    Reader tail(bytes.data() + body, 4);
    Reader r(bytes.data(), body);
    r.expect_magic();
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    if (tail.u32() != crc_of(bytes.data(), body)) throw std::runtime_error("checkpoint: checksum mismatch");

    Checkpoint c;
    c.num_steps = r.i32();
    c.scale = r.f64();
    c.mlp.data_dim = r.i64();
    c.mlp.embed_dim = r.i32();
    c.mlp.max_period = r.f64();
    const std::uint32_t n_hidden = r.u32();
    if (n_hidden > 64) throw std::runtime_error("checkpoint: implausible layer count");
    c.mlp.hidden.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i) c.mlp.hidden.push_back(r.i32());
    c.seed = r.u64();
    c.step = r.i64();
    c.params = r.tensors();

    c.adam.beta1 = r.f64();
    c.adam.beta2 = r.f64();
    c.adam.eps = r.f64();
    c.adam.step = r.i64();
    c.adam.m = r.tensors();
    c.adam.v = r.tensors();

    c.ema.decay = r.f64();
    c.ema.start_step = r.i64();
    c.ema.update_interval = r.i64();
    c.ema.primed = r.u8() != 0;
    c.ema.shadow = r.tensors();

    auto& p = c.plateau;
    p.current_lr = r.f64();
    p.max_lr = r.f64();
    p.min_lr = r.f64();
    p.factor = r.f64();
    p.patience = r.i64();
    p.cooldown = r.i64();
    p.threshold = r.f64();
    p.best = r.f64();
    p.has_best = r.u8() != 0;
    p.num_bad = r.i64();
    p.cooldown_left = r.i64();
    p.reductions = r.i64();
    if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes");

    c.mlp.validate();
    NoisePredictor(c.mlp, c.params);  // throws if the parameters do not fit the architecture
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace bbdm
