#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace msrisk::betareg {

enum class LinkKind { logit, probit, cloglog, loglog, log };

/// Strictly monotone, twice-differentiable link g. The first four map (0,1)
/// onto the real line; `log` maps (0, inf). The log-log link is
/// g(mu) = log(-log(mu)), so mu = exp(-exp(eta)) decreases in eta.
class Link {
 public:
  constexpr explicit Link(LinkKind kind = LinkKind::logit) : kind_(kind) {}

  LinkKind kind() const { return kind_; }
  std::string_view name() const;
  bool unit_interval() const { return kind_ != LinkKind::log; }

  double link(double mu) const;
  double inverse(double eta) const;
  /// d mu / d eta at eta.
  double mu_eta(double eta) const;
  /// g'(mu) = d eta / d mu at mu.
  double derivative(double mu) const;

  bool operator==(const Link&) const = default;

 private:
  LinkKind kind_;
};

std::optional<Link> parse_link(std::string_view name);

}  // namespace msrisk::betareg
