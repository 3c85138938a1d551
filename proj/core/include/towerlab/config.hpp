#ifndef TOWERLAB_CONFIG_HPP
#define TOWERLAB_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace towerlab {

// Flat key=value experiment file with [section] headers.  Keys are stored
// as "section.key"; values are strings with typed getters.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& def) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const;

  // FNV-1a over the canonical sorted "key=value" serialization.
  std::uint64_t hash() const;
  std::string canonical() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace towerlab

#endif
