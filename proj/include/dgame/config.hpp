#pragma once

#include "dgame/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dgame {

// Flat key-value configuration with dotted section names, read from and
// written to an INI-style text format:
//
//   [game]
//   case = intersection
//   [game.geometry]
//   road_length = 70
//
// Keys are stored as "game.geometry.road_length". Serialization is canonical
// (sections and keys sorted), so hash() fingerprints the semantic content.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int dflt) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  // Comma-separated list of doubles.
  Vec get_vec(const std::string& key) const;

  void set_string(const std::string& key, const std::string& v);
  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, long long v);
  void set_bool(const std::string& key, bool v);
  void set_vec(const std::string& key, const Vec& v);

  // Merge: keys from other override keys here.
  void merge(const Config& other);

  std::string serialize() const;
  void write_file(const std::string& path) const;
  std::uint64_t hash() const { return fnv1a(serialize()); }

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace dgame
