#include "normest/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "normest/errors.hpp"

namespace normest {

namespace {

std::vector<double> parse_line_reals(const std::string& line) {
  std::vector<double> values;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p >= end) break;
    double v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) {
      throw ParseError("not a number");
    }
    values.push_back(v);
    p = next;
  }
  return values;
}

std::vector<Vec3> read_triples(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
  std::vector<Vec3> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<double> vals;
    try {
      vals = parse_line_reals(line);
    } catch (const ParseError&) {
      throw ParseError(std::string(what) + " '" + path + "' line " +
                       std::to_string(line_no) + ": not a number");
    }
    if (vals.empty()) continue;  // blank line
    if (vals.size() < 3) {
      throw ParseError(std::string(what) + " '" + path + "' line " +
                       std::to_string(line_no) + ": expected 3 values, got " +
                       std::to_string(vals.size()));
    }
    out.emplace_back(vals[0], vals[1], vals[2]);
  }
  return out;
}

}  // namespace

std::string normals_path_for(const std::string& cloud_path) {
  std::filesystem::path p(cloud_path);
  p.replace_extension(".normals");
  return p.string();
}

PointCloud read_points(const std::string& path) {
  PointCloud cloud;
  cloud.points = read_triples(path, "points file");
  cloud.name = std::filesystem::path(path).stem().string();
  if (cloud.points.empty()) {
    throw InvalidInputError("points file '" + path + "' holds no points");
  }

  const std::string npath = normals_path_for(path);
  if (npath != path && std::filesystem::exists(npath)) {
    cloud.gt_normals = read_normals_file(npath);
    if (cloud.gt_normals.size() != cloud.points.size()) {
      throw InvalidInputError(
          "'" + npath + "': " + std::to_string(cloud.gt_normals.size()) +
          " normals for " + std::to_string(cloud.points.size()) + " points");
    }
  }
  return cloud;
}

std::vector<Vec3> read_normals_file(const std::string& path, bool normalize) {
  std::vector<Vec3> normals = read_triples(path, "normals file");
  if (!normalize) return normals;
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double n = normals[i].norm();
    if (std::abs(n - 1.0) > 1e-3) {
      throw InvalidInputError("'" + path + "' line " + std::to_string(i + 1) +
                              ": normal is far from unit length (|n|=" +
                              std::to_string(n) + ")");
    }
    normals[i] /= n;
  }
  return normals;
}

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_write(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return File(f);
}
}  // namespace

void write_points(const std::string& path, const PointCloud& cloud) {
  File f = open_write(path);
  for (const Vec3& p : cloud.points) {
    std::fprintf(f.get(), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
  }
}

void write_normals(const std::string& path, const std::vector<Vec3>& normals) {
  File f = open_write(path);
  for (const Vec3& n : normals) {
    std::fprintf(f.get(), "%.12g %.12g %.12g\n", n.x(), n.y(), n.z());
  }
}

std::vector<int> read_index_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file '" + path + "'");
  std::vector<int> idx;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    long v;
    if (!(ss >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("index file '" + path + "' line " +
                       std::to_string(line_no) + ": not an integer");
    }
    idx.push_back(static_cast<int>(v));
  }
  return idx;
}

void write_index_file(const std::string& path, const std::vector<int>& idx) {
  File f = open_write(path);
  for (int i : idx) std::fprintf(f.get(), "%d\n", i);
}

namespace {

std::string join_widths(const std::vector<int>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(widths[i]);
  }
  return out;
}

std::vector<int> split_widths(const std::string& text) {
  std::vector<int> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  File f = open_write(path);
  std::fprintf(f.get(), "normest-checkpoint %d\n",
               checkpoint.params.version);
  const TrainConfig& c = checkpoint.config;
  std::fprintf(f.get(), "meta epoch %d\n", checkpoint.epoch);
  std::fprintf(f.get(), "meta r %d\n", c.r);
  std::fprintf(f.get(), "meta k %d\n", c.k);
  std::fprintf(f.get(), "meta n %d\n", c.order);
  std::fprintf(f.get(), "meta m %d\n", c.m);
  std::fprintf(f.get(), "meta batch_size %d\n", c.batch_size);
  std::fprintf(f.get(), "meta learning_rate %.17g\n", c.learning_rate);
  std::fprintf(f.get(), "meta alpha1 %.17g\n", c.alpha1);
  std::fprintf(f.get(), "meta alpha2 %.17g\n", c.alpha2);
  std::fprintf(f.get(), "meta seed %llu\n",
               static_cast<unsigned long long>(c.seed));
  const ModelParams& p = checkpoint.params;
  std::fprintf(f.get(), "meta qst_point_widths %s\n",
               join_widths(p.qst_point_widths).c_str());
  std::fprintf(f.get(), "meta qst_head_widths %s\n",
               join_widths(p.qst_head_widths).c_str());
  std::fprintf(f.get(), "meta feat_widths %s\n",
               join_widths(p.feat_widths).c_str());
  std::fprintf(f.get(), "meta head_widths %s\n",
               join_widths(p.head_widths).c_str());
  std::fprintf(f.get(), "meta update_widths %s\n",
               join_widths(p.update_widths).c_str());

  checkpoint.params.for_each_array([&](const std::string& name,
                                       const Eigen::MatrixXd& a) {
    std::fprintf(f.get(), "array %s %d %d\n", name.c_str(),
                 static_cast<int>(a.rows()), static_cast<int>(a.cols()));
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) {
        std::fprintf(f.get(), j ? " %.17g" : "%.17g", a(i, j));
      }
      std::fprintf(f.get(), "\n");
    }
  });
  std::fprintf(f.get(), "end\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "normest-checkpoint") {
    throw ParseError("'" + path + "': not a normest checkpoint");
  }
  if (version != 1) {
    throw ParseError("'" + path + "': unsupported checkpoint version " +
                     std::to_string(version));
  }

  Checkpoint ck;
  std::map<std::string, std::string> meta;
  std::map<std::string, Eigen::MatrixXd> arrays;
  std::string word;
  while (in >> word) {
    if (word == "meta") {
      std::string key, value;
      in >> key >> value;
      meta[key] = value;
    } else if (word == "array") {
      std::string name;
      int rows = 0, cols = 0;
      if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) {
        throw ParseError("'" + path + "': malformed array header");
      }
      Eigen::MatrixXd a(rows, cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          if (!(in >> a(i, j))) {
            throw ParseError("'" + path + "': truncated array '" + name + "'");
          }
        }
      }
      arrays[name] = std::move(a);
    } else if (word == "end") {
      break;
    } else {
      throw ParseError("'" + path + "': unexpected token '" + word + "'");
    }
  }

  const auto meta_int = [&](const std::string& key, int fallback) {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : std::stoi(it->second);
  };
  const auto meta_double = [&](const std::string& key, double fallback) {
    auto it = meta.find(key);
    return it == meta.end() ? fallback : std::stod(it->second);
  };
  ck.epoch = meta_int("epoch", 0);
  ck.config.r = meta_int("r", ck.config.r);
  ck.config.k = meta_int("k", ck.config.k);
  ck.config.order = meta_int("n", ck.config.order);
  ck.config.m = meta_int("m", ck.config.m);
  ck.config.batch_size = meta_int("batch_size", ck.config.batch_size);
  ck.config.learning_rate =
      meta_double("learning_rate", ck.config.learning_rate);
  ck.config.alpha1 = meta_double("alpha1", ck.config.alpha1);
  ck.config.alpha2 = meta_double("alpha2", ck.config.alpha2);
  if (auto it = meta.find("seed"); it != meta.end()) {
    ck.config.seed = std::stoull(it->second);
  }

  ModelParams& p = ck.params;
  const auto widths = [&](const std::string& key, std::vector<int>& target) {
    if (auto it = meta.find(key); it != meta.end()) {
      target = split_widths(it->second);
    }
  };
  widths("qst_point_widths", p.qst_point_widths);
  widths("qst_head_widths", p.qst_head_widths);
  widths("feat_widths", p.feat_widths);
  widths("head_widths", p.head_widths);
  widths("update_widths", p.update_widths);

  // Size the layer stacks from the widths, then fill from the named arrays.
  p.allocate();
  p.for_each_array([&](const std::string& name, Eigen::MatrixXd& a) {
    auto it = arrays.find(name);
    if (it == arrays.end()) {
      throw ParseError("'" + path + "': missing array '" + name + "'");
    }
    a = it->second;
  });
  ck.params.validate();
  return ck;
}

void write_loss_trace(const std::string& path,
                      const std::vector<EpochStats>& trace) {
  File f = open_write(path);
  std::fprintf(f.get(), "epoch,mean_loss\n");
  for (const EpochStats& e : trace) {
    std::fprintf(f.get(), "%d,%.17g\n", e.epoch, e.mean_loss);
  }
}

void write_category_table(const std::string& path,
                          const CategoryTable& table) {
  File f = open_write(path);
  std::fprintf(f.get(), "category,count,rmse_deg");
  for (const auto& [alpha, pct] : table.average.pgp) {
    std::fprintf(f.get(), ",pgp%g", alpha);
  }
  std::fprintf(f.get(), "\n");
  const auto row = [&](const CategoryRow& r) {
    std::fprintf(f.get(), "%s,%d,%.6f", r.category.c_str(), r.point_count,
                 r.rmse);
    for (const auto& [alpha, pct] : r.pgp) std::fprintf(f.get(), ",%.6f", pct);
    std::fprintf(f.get(), "\n");
  };
  for (const CategoryRow& r : table.rows) row(r);
  row(table.average);
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config '" + path + "' line " +
                       std::to_string(line_no) + ": expected key = value");
    }
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config '" + path + "' line " +
                       std::to_string(line_no) + ": empty key");
    }
    pairs.emplace_back(std::move(key), std::move(value));
  }
  return pairs;
}

}  // namespace normest
