#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "qa/data.hpp"
#include "qa/span_model.hpp"
#include "qa/train.hpp"

namespace qa::cli {

/// Flat key=value settings with dotted sections. Only keys present in the
/// defaults may be assigned.
class Config {
 public:
  static Config defaults(std::string_view command);

  void set(const std::string& key, const std::string& value);
  /// "k=v" form, as given to --set.
  void set_assignment(std::string_view assignment);
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;

  ModelConfig model() const;
  TrainConfig train() const;
  DecodeConfig decode() const;
  SyntheticSpec synth() const;

  void log(std::ostream& os) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace qa::cli
