#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace metapop {

/// Flat `key = value` text, one entry per line; `#` starts a comment.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  /// Comma- or space-separated list of numbers.
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Canonical text (sorted keys), used for manifests and hashing.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a digest, printed as hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace metapop
