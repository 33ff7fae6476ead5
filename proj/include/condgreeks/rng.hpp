#pragma once

#include <cstdint>

namespace cg {

/// Counter-based random stream.  A stream is identified by the triple
/// (master_seed, stream_index, substream_index); replaying the same triple
/// reproduces the identical sequence bit-for-bit, and distinct triples give
/// statistically independent sequences.  Streams are cheap value types, so
/// replication-parallel code simply derives one stream per replication and
/// substreams for each independent purpose inside it.
struct RngStream {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;
    std::uint64_t substream_index = 0;
    std::uint64_t counter = 0;

    static RngStream from(std::uint64_t master_seed, std::uint64_t stream_index);

    /// Fresh stream for an independent purpose inside the same replication.
    RngStream substream(std::uint64_t substream_index) const;

    std::uint64_t next_u64();
    /// Uniform on the open interval (0,1).
    double next_uniform();
    /// Standard normal via the inverse CDF, so one counter tick consumes
    /// exactly one uniform.
    double next_normal();

private:
    std::uint64_t key_ = 0;
    static std::uint64_t derive_key(std::uint64_t master, std::uint64_t stream, std::uint64_t sub);
};

} // namespace cg
