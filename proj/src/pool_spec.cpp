#include "guesswhich/pool_spec.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "guesswhich/error.hpp"
#include "guesswhich/jsonl.hpp"

namespace guesswhich {

using nlohmann::json;

bool PoolSpec::contains(const ImageId& id) const {
  return std::find(image_ids.begin(), image_ids.end(), id) != image_ids.end();
}

void PoolSpec::validate() const {
  if (image_ids.empty()) throw Error(ErrorCode::InvalidPool, "pool '" + pool_id + "' has no images");
  std::unordered_set<ImageId> seen;
  for (const auto& id : image_ids) {
    if (id.empty()) throw Error(ErrorCode::InvalidPool, "pool '" + pool_id + "' contains an empty image id");
    if (!seen.insert(id).second)
      throw Error(ErrorCode::InvalidPool, "pool '" + pool_id + "' repeats image '" + id + "'");
  }
  if (!seen.contains(secret_id))
    throw Error(ErrorCode::InvalidPool, "pool '" + pool_id + "' does not contain its secret '" + secret_id + "'");
}

json to_json(const PoolSpec& pool) {
  json out = {{"pool_id", pool.pool_id},
              {"secret_id", pool.secret_id},
              {"caption", pool.caption},
              {"image_ids", pool.image_ids}};
  if (pool.provenance) {
    json members = json::array();
    for (const auto& m : pool.provenance->members)
      members.push_back({{"image_id", m.image_id}, {"shell", m.shell}, {"distance", m.distance}});
    out["shell_provenance"] = {{"base_radius", pool.provenance->base_radius},
                               {"shell_count", pool.provenance->shell_count},
                               {"seed", pool.provenance->seed},
                               {"members", std::move(members)}};
  }
  return out;
}

PoolSpec pool_from_json(const json& record) {
  try {
    PoolSpec pool;
    pool.pool_id = record.at("pool_id").get<std::string>();
    pool.secret_id = record.at("secret_id").get<std::string>();
    pool.caption = record.value("caption", std::string{});
    pool.image_ids = record.at("image_ids").get<std::vector<ImageId>>();
    if (auto it = record.find("shell_provenance"); it != record.end() && !it->is_null()) {
      ShellProvenance prov;
      prov.base_radius = it->at("base_radius").get<double>();
      prov.shell_count = it->at("shell_count").get<int>();
      prov.seed = it->value("seed", std::uint64_t{0});
      for (const auto& m : it->at("members"))
        prov.members.push_back(
            {m.at("image_id").get<std::string>(), m.at("shell").get<int>(), m.at("distance").get<double>()});
      pool.provenance = std::move(prov);
    }
    pool.validate();
    return pool;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("pool record: ") + e.what());
  }
}

std::vector<PoolSpec> read_pools(std::istream& in) {
  std::vector<PoolSpec> pools;
  std::unordered_set<std::string> ids;
  for_each_jsonl_record(in, "pools", [&](const json& record, std::size_t line) {
    auto pool = pool_from_json(record);
    if (!ids.insert(pool.pool_id).second)
      throw Error(ErrorCode::DuplicateId, "pools:" + std::to_string(line) + ": repeated pool_id '" + pool.pool_id + "'");
    pools.push_back(std::move(pool));
  });
  return pools;
}

std::vector<PoolSpec> read_pools_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open pool file '" + path + "'");
  return read_pools(in);
}

void write_pools(std::ostream& out, const std::vector<PoolSpec>& pools) {
  for (const auto& pool : pools) out << to_json(pool).dump() << '\n';
}

void write_pools_file(const std::string& path, const std::vector<PoolSpec>& pools) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::StorageError, "cannot write pool file '" + path + "'");
  write_pools(out, pools);
  if (!out) throw Error(ErrorCode::StorageError, "short write to '" + path + "'");
}

}  // namespace guesswhich
