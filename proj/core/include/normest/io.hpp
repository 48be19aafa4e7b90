#pragma once

#include <string>
#include <vector>

#include "normest/evaluation.hpp"
#include "normest/geometry.hpp"
#include "normest/training.hpp"

namespace normest {

/// Reads whitespace-separated "x y z" lines. A sibling file with the
/// extension replaced by ".normals" (same stem) is loaded as ground truth
/// when present: three reals per line, re-normalized when within 1e-3 of
/// unit length, rejected otherwise.
PointCloud read_points(const std::string& path);

/// Reads a bare three-reals-per-line normals file.
std::vector<Vec3> read_normals_file(const std::string& path,
                                    bool normalize = true);

void write_points(const std::string& path, const PointCloud& cloud);
void write_normals(const std::string& path, const std::vector<Vec3>& normals);

/// Evaluation subset: one integer per line.
std::vector<int> read_index_file(const std::string& path);
void write_index_file(const std::string& path, const std::vector<int>& idx);

/// Sibling ".normals" path for a cloud file path.
std::string normals_path_for(const std::string& cloud_path);

/// Versioned, self-describing text checkpoint. Layout:
///   normest-checkpoint 1
///   meta <key> <value>          (epoch, r, k, order n, m, widths, ...)
///   array <name> <rows> <cols>
///   <rows lines of cols decimal values>
///   ...
///   end
/// Values round-trip exactly (printed with 17 significant digits).
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

void write_loss_trace(const std::string& path,
                      const std::vector<EpochStats>& trace);

/// Per-category RMSE/PGP table mirroring the evaluation layout:
/// category,count,rmse_deg,pgp5,pgp10 with a final average row.
void write_category_table(const std::string& path,
                          const CategoryTable& table);

/// Flat "key = value" configuration file with '#' comments. Returns pairs
/// in file order; unknown keys are the caller's responsibility.
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path);

}  // namespace normest
