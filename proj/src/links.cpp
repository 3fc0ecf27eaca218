#include "msrisk/links.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

namespace msrisk::betareg {

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

std::string_view Link::name() const {
  switch (kind_) {
    case LinkKind::logit: return "logit";
    case LinkKind::probit: return "probit";
    case LinkKind::cloglog: return "cloglog";
    case LinkKind::loglog: return "loglog";
    case LinkKind::log: return "log";
  }
  return "?";
}

double Link::link(double mu) const {
  switch (kind_) {
    case LinkKind::logit: return std::log(mu) - std::log1p(-mu);
    case LinkKind::probit:
      return boost::math::quantile(boost::math::normal_distribution<double>(), mu);
    case LinkKind::cloglog: return std::log(-std::log1p(-mu));
    case LinkKind::loglog: return std::log(-std::log(mu));
    case LinkKind::log: return std::log(mu);
  }
  return 0.0;
}

double Link::inverse(double eta) const {
  switch (kind_) {
    case LinkKind::logit:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::probit: return 0.5 * std::erfc(-eta / std::numbers::sqrt2);
    case LinkKind::cloglog: return -std::expm1(-std::exp(eta));
    case LinkKind::loglog: return std::exp(-std::exp(eta));
    case LinkKind::log: return std::exp(eta);
  }
  return 0.0;
}

double Link::mu_eta(double eta) const {
  switch (kind_) {
    case LinkKind::logit: {
      const double m = inverse(eta);
      return m * (1.0 - m);
    }
    case LinkKind::probit: return normal_pdf(eta);
    case LinkKind::cloglog: return std::exp(eta - std::exp(eta));
    case LinkKind::loglog: return -std::exp(eta - std::exp(eta));
    case LinkKind::log: return std::exp(eta);
  }
  return 0.0;
}

double Link::derivative(double mu) const {
  switch (kind_) {
    case LinkKind::logit: return 1.0 / (mu * (1.0 - mu));
    case LinkKind::probit: return 1.0 / normal_pdf(link(mu));
    case LinkKind::cloglog: return -1.0 / ((1.0 - mu) * std::log1p(-mu));
    case LinkKind::loglog: return 1.0 / (mu * std::log(mu));
    case LinkKind::log: return 1.0 / mu;
  }
  return 0.0;
}

std::optional<Link> parse_link(std::string_view name) {
  for (auto k : {LinkKind::logit, LinkKind::probit, LinkKind::cloglog, LinkKind::loglog,
                 LinkKind::log}) {
    if (Link(k).name() == name) return Link(k);
  }
  return std::nullopt;
}

}  // namespace msrisk::betareg
