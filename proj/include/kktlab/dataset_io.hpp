#pragma once

#include <string>

#include "kktlab/dataset.hpp"

namespace kktlab {

/// Binary layout: "KKTD", u32 version, u64 header length, JSON header (spec,
/// seed, n, d), then X row-major as f64, y_clean and y_obs as i32, the noise
/// mask as u8 and, for cluster data, cluster ids as i32. Little-endian hosts
/// only. Round-trips bit-exactly.
void write_dataset_binary(const Dataset& ds, const std::string& path);

/// First line "# {json header}", then index,cluster_id,y_clean,y_obs,x_1..x_d.
/// Values use 17 significant digits; cluster_id is empty for non-cluster data.
void write_dataset_csv(const Dataset& ds, const std::string& path);

/// Detects the format from the first bytes.
Dataset read_dataset(const std::string& path);

}  // namespace kktlab
