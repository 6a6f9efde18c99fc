#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "echosim/detection.hpp"
#include "echosim/echo.hpp"
#include "echosim/pumping.hpp"
#include "echosim/spectral.hpp"

namespace echosim::io {

/// All writers emit doubles with 17 significant digits so that a read-back
/// reproduces the exact binary values.

void write_profile_csv(const spectral::SpectralProfile& profile,
                       const std::filesystem::path& path);
spectral::SpectralProfile read_profile_csv(const std::filesystem::path& path);

void write_populations_csv(const pumping::PopulationField& pops,
                           const std::filesystem::path& path);

void write_echo_csv(const echo::EchoResult& result,
                    const std::filesystem::path& path);
std::string echo_list_json(const echo::EchoResult& result);

void write_histogram_csv(const detection::CountHistogram& hist,
                         const std::filesystem::path& path);

void write_fringe_csv(const detection::FringeScan& scan,
                      const std::filesystem::path& path);
std::string fringe_fit_json(const detection::FringeFit& fit);

void write_text(const std::string& text, const std::filesystem::path& path);

/// FNV-1a 64-bit hash of a file's bytes, hex-encoded.
std::string file_hash(const std::filesystem::path& path);
std::uint64_t fnv1a64(const std::string& data);

std::string format_double(double v);  ///< %.17g

}  // namespace echosim::io
