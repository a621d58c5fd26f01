#include "pet/backend.hpp"

#include <fstream>

#include "json.hpp"
#include "pet/data.hpp"

namespace pet {

void write_snapshot_file(const std::filesystem::path& dir, const std::string& stem,
                         const std::string& backend_name, std::uint64_t seed,
                         int step_count, const ParamSnapshot& params) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["backend"] = backend_name;
  j["seed"] = seed;
  j["step_count"] = step_count;
  j["params"] = params;
  std::ofstream out(dir / (stem + ".snapshot.json"));
  if (!out) throw Error("cannot write snapshot: " + (dir / stem).string());
  out << j.dump() << "\n";
}

SnapshotFile read_snapshot_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open snapshot: " + file.string());
  nlohmann::json j;
  in >> j;
  SnapshotFile s;
  s.backend_name = j.at("backend").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.step_count = j.at("step_count").get<int>();
  s.params = j.at("params").get<std::string>();
  return s;
}

}  // namespace pet
