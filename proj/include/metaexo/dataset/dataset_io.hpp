#pragma once

#include <filesystem>

#include "metaexo/dataset/dataset.hpp"

namespace metaexo::dataset {

/// Writes `data` under `dir` as tasks/<task_id>/<idx>.csv trajectory files
/// (header t,angle,velocity) plus a manifest.json recording dt, subject ids
/// and raw lengths. Overwrites existing files. Output is byte-stable for a
/// given dataset.
void write_dataset(const std::filesystem::path& dir, const MetaDataset& data);

/// Reads a dataset written by write_dataset and validates every trajectory.
/// Throws IoError when the manifest and the CSV files disagree.
MetaDataset read_dataset(const std::filesystem::path& dir);

/// Single trajectory in the same row format the dataset files use. The
/// reader takes dt from the first two time cells and validates the result.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace metaexo::dataset
