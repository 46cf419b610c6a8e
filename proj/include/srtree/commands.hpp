#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "srtree/config.hpp"
#include "srtree/excursion.hpp"

namespace srtree {

inline constexpr const char* kVersion = "0.3.1";

// Per-replica seed; replica r of a run with seed s always sees the same stream.
inline std::uint64_t replica_seed(std::uint64_t seed, int replica) {
  return hash_combine(seed, 0x7265706cULL + static_cast<std::uint64_t>(replica));
}

// Runs fn(0..count-1) on up to jobs threads; results must be stored by index.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

// Comment lines ("# ...") placed above every CSV header row.
std::string provenance_header(const ExperimentConfig& c);

// Binary excursion dump: "SRTX", u32 version, u64 m, f64 c, u64 seed, u64 spec hash,
// then m+1 f64 values; little-endian.
void write_excursion_binary(const std::string& path, const GridExcursion& f, double c,
                            std::uint64_t seed, std::uint64_t spec_hash);
GridExcursion read_excursion_binary(const std::string& path, double* c = nullptr,
                                    std::uint64_t* seed = nullptr, std::uint64_t* spec_hash = nullptr);

// Executes c.command, writing artifacts under out_dir; returns the process exit status.
int run(const ExperimentConfig& c, const std::string& out_dir, std::ostream& log);

}  // namespace srtree
