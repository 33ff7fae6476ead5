#include "condgreeks/rng.hpp"
#include "condgreeks/num.hpp"

namespace cg {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

} // namespace

std::uint64_t RngStream::derive_key(std::uint64_t master, std::uint64_t stream, std::uint64_t sub) {
    std::uint64_t h = kGolden;
    h = mix64(h ^ (master + kGolden));
    h = mix64(h ^ (stream + kGolden));
    h = mix64(h ^ (sub + kGolden));
    return h;
}

RngStream RngStream::from(std::uint64_t master_seed, std::uint64_t stream_index) {
    RngStream s;
    s.master_seed = master_seed;
    s.stream_index = stream_index;
    s.substream_index = 0;
    s.counter = 0;
    s.key_ = derive_key(master_seed, stream_index, 0);
    return s;
}

RngStream RngStream::substream(std::uint64_t substream_index) const {
    RngStream s;
    s.master_seed = master_seed;
    s.stream_index = stream_index;
    s.substream_index = substream_index;
    s.counter = 0;
    s.key_ = derive_key(master_seed, stream_index, substream_index);
    return s;
}

std::uint64_t RngStream::next_u64() {
    counter += 1;
    return mix64(key_ + counter * kGolden);
}

double RngStream::next_uniform() {
    // 53 random bits centered in each cell keeps the value strictly inside (0,1).
    const double scale = 1.0 / 9007199254740992.0; // 2^-53
    return (static_cast<double>(next_u64() >> 11) + 0.5) * scale;
}

double RngStream::next_normal() {
    return normal_quantile(next_uniform());
}

} // namespace cg
