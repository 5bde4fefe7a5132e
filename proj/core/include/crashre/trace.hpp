#ifndef CRASHRE_TRACE_HPP_
#define CRASHRE_TRACE_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashre {

// Post-burn-in, post-thinning draws of one chain, stored column-wise.
// All columns have the same length.
class Trace {
 public:
  Trace() = default;
  explicit Trace(std::vector<std::string> names);

  void reserve(std::size_t draws);
  // One value per parameter, in names() order.
  void append(std::span<const double> draw);

  std::size_t length() const { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t parameter_count() const { return names_.size(); }
  std::span<const std::string> names() const { return names_; }
  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  // Throws SpecError for an unknown name.
  std::span<const double> column(std::string_view name) const;

  bool operator==(const Trace&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

// "phi[12]" -> 12
std::optional<std::size_t> parse_phi_name(std::string_view name);
std::string phi_name(std::size_t group);

}  // namespace crashre

#endif  // CRASHRE_TRACE_HPP_
