#include "tdlab/learners.hpp"

#include <charconv>
#include <sstream>

namespace tdlab {

namespace {

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

StepSchedule StepSchedule::constant(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("constant step size must be positive");
  return {Kind::constant, gamma, 0.0};
}

StepSchedule StepSchedule::harmonic(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("harmonic schedule needs a > 0 and b > 0");
  }
  return {Kind::harmonic, a, b};
}

std::string StepSchedule::to_string() const {
  if (kind_ == Kind::constant) return "constant:" + shortest(a_);
  return "harmonic:" + shortest(a_) + "," + shortest(b_);
}

StepSchedule StepSchedule::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("schedule '" + std::string(text) + "' must be constant:<g> or harmonic:<a>,<b>");
  }
  const std::string_view kind = text.substr(0, colon);
  const std::string_view args = text.substr(colon + 1);
  if (kind == "constant") return constant(parse_double(args, "step size"));
  if (kind == "harmonic") {
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) throw std::invalid_argument("harmonic schedule needs two parameters a,b");
    return harmonic(parse_double(args.substr(0, comma), "harmonic a"), parse_double(args.substr(comma + 1), "harmonic b"));
  }
  throw std::invalid_argument("unknown schedule kind '" + std::string(kind) + "'");
}

std::string to_string(LearnerVariant v) {
  switch (v) {
    case LearnerVariant::td: return "td";
    case LearnerVariant::std: return "std";
    case LearnerVariant::std_nonlinear: return "std-nonlinear";
    case LearnerVariant::std_scaled: return "std-scaled";
    case LearnerVariant::dt: return "dt";
  }
  return "?";
}

LearnerVariant parse_learner_variant(std::string_view text) {
  for (auto v : {LearnerVariant::td, LearnerVariant::std, LearnerVariant::std_nonlinear, LearnerVariant::std_scaled,
                 LearnerVariant::dt}) {
    if (to_string(v) == text) return v;
  }
  throw std::invalid_argument("unknown learner '" + std::string(text) + "' (td, std, std-nonlinear, std-scaled, dt)");
}

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
}

DivergenceError::DivergenceError(std::int64_t step_, double norm_, double bound)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "weights diverged at step " << step_ << ": ||w|| = " << norm_ << " exceeds bound " << bound;
        return os.str();
      }()),
      step(step_),
      norm(norm_) {}

}  // namespace tdlab
