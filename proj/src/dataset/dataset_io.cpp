#include "metaexo/dataset/dataset_io.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"

namespace metaexo::dataset {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string traj_filename(std::size_t idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu.csv", idx);
  return buf;
}

std::vector<std::vector<double>> trajectory_rows(const Trajectory& traj) {
  std::vector<std::vector<double>> rows;
  rows.reserve(traj.length());
  for (std::size_t k = 0; k < traj.length(); ++k)
    rows.push_back({static_cast<double>(k) * traj.dt, traj.samples[k].angle,
                    traj.samples[k].velocity});
  return rows;
}

}  // namespace

void write_dataset(const fs::path& dir, const MetaDataset& data) {
  fs::create_directories(dir / "tasks");
  json manifest;
  manifest["version"] = 1;
  manifest["tasks"] = json::object();
  for (const TaskDataset& task : data.tasks) {
    if (task.task_id.empty()) throw IoError("task without an id cannot be written");
    json entry;
    json files = json::array();
    const fs::path task_dir = dir / "tasks" / task.task_id;
    fs::create_directories(task_dir);
    double dt = 0.0;
    for (std::size_t i = 0; i < task.trajectories.size(); ++i) {
      const Trajectory& traj = task.trajectories[i];
      traj.validate();
      if (i == 0) dt = traj.dt;
      if (traj.dt != dt) throw IoError("task " + task.task_id + " mixes sample periods");
      const std::string name = traj_filename(i);
      write_csv(task_dir / name, {"t", "angle", "velocity"}, trajectory_rows(traj));
      json file;
      file["path"] = "tasks/" + task.task_id + "/" + name;
      file["length"] = traj.length();
      file["subject_id"] = traj.subject_id;
      files.push_back(std::move(file));
    }
    entry["dt"] = dt;
    entry["files"] = std::move(files);
    manifest["tasks"][task.task_id] = std::move(entry);
  }
  write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

MetaDataset read_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("manifest.json in " + dir.string() + ": " + e.what());
  }
  if (!manifest.contains("version") || manifest["version"] != 1)
    throw IoError("manifest.json in " + dir.string() + ": unsupported version");
  if (!manifest.contains("tasks") || !manifest["tasks"].is_object())
    throw IoError("manifest.json in " + dir.string() + ": missing tasks object");

  MetaDataset out;
  for (const auto& [task_id, entry] : manifest["tasks"].items()) {
    TaskDataset task;
    task.task_id = task_id;
    double dt = 0.0;
    try {
      dt = entry.at("dt").get<double>();
      for (const json& file : entry.at("files")) {
        const std::string rel = file.at("path").get<std::string>();
        const CsvTable table = read_csv(dir / rel);
        if (table.header != std::vector<std::string>{"t", "angle", "velocity"})
          throw IoError(rel + ": unexpected column header");
        if (table.rows.size() != file.at("length").get<std::size_t>())
          throw IoError(rel + ": length disagrees with the manifest");
        Trajectory traj;
        traj.dt = dt;
        traj.task_id = task_id;
        traj.subject_id = file.at("subject_id").get<std::string>();
        traj.samples.reserve(table.rows.size());
        for (const std::vector<double>& row : table.rows) {
          if (row.size() != 3) throw IoError(rel + ": expected 3 columns");
          traj.samples.push_back({row[1], row[2]});
        }
        traj.validate();
        task.trajectories.push_back(std::move(traj));
      }
    } catch (const json::exception& e) {
      throw IoError("manifest.json entry for task " + task_id + ": " + e.what());
    }
    out.tasks.push_back(std::move(task));
  }
  return out;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
  traj.validate();
  write_csv(path, {"t", "angle", "velocity"}, trajectory_rows(traj));
}

Trajectory read_trajectory_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"t", "angle", "velocity"})
    throw IoError(path.string() + ": unexpected column header");
  if (table.rows.size() < 2)
    throw TooShortError(path.string() + ": a trajectory needs at least 2 samples");
  Trajectory traj;
  traj.dt = table.rows[1][0] - table.rows[0][0];
  for (const std::vector<double>& row : table.rows) {
    if (row.size() != 3) throw IoError(path.string() + ": expected 3 columns");
    traj.samples.push_back({row[1], row[2]});
  }
  traj.validate();
  return traj;
}

}  // namespace metaexo::dataset
