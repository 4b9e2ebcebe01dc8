#include "bilevel/registry.hpp"

#include <stdexcept>

#include "bilevel/problems/data_weighting.hpp"
#include "bilevel/problems/mixture.hpp"
#include "bilevel/problems/ridge.hpp"
#include "bilevel/problems/synthetic_quadratic.hpp"
#include "bilevel/problems/toy_transfer.hpp"

namespace bilevel {

namespace {
double get_d(const ProblemSpec& s, const std::string& key, double fallback) {
  auto it = s.params.find(key);
  if (it == s.params.end()) return fallback;
  size_t pos = 0;
  const double v = std::stod(it->second, &pos);
  if (pos != it->second.size())
    throw std::invalid_argument("problem." + key + ": bad number '" + it->second + "'");
  return v;
}
int get_i(const ProblemSpec& s, const std::string& key, int fallback) {
  return static_cast<int>(get_d(s, key, fallback));
}
uint64_t get_seed(const ProblemSpec& s) {
  return static_cast<uint64_t>(get_d(s, "seed", 0));
}
}  // namespace

ProblemPtr make_problem(const ProblemSpec& spec) {
  if (spec.name == "quadratic")
    return make_random_quadratic(get_i(spec, "dx", 2), get_i(spec, "dy", 2),
                                 get_i(spec, "n", 4), get_i(spec, "q", 4), get_seed(spec));
  if (spec.name == "ridge_demo") return make_scalar_ridge_demo();
  if (spec.name == "ridge")
    return make_ridge(get_i(spec, "n", 20), get_i(spec, "q", 40), get_i(spec, "dy", 3),
                      get_seed(spec), get_d(spec, "label_noise", 0.1));
  if (spec.name == "mixture") return make_mixture_population();
  if (spec.name == "mixture_corrupted") return make_mixture_corrupted();
  if (spec.name == "toy_transfer") {
    ToyTransferOptions opts;
    opts.q = get_i(spec, "q", opts.q);
    opts.rho1 = get_d(spec, "rho1", opts.rho1);
    opts.rho2 = get_d(spec, "rho2", opts.rho2);
    opts.data_variance = get_d(spec, "data_variance", opts.data_variance);
    opts.noise_variance = get_d(spec, "noise_variance", opts.noise_variance);
    opts.d = get_i(spec, "d", opts.d);
    return make_toy_transfer(get_i(spec, "n", 500), get_seed(spec), opts);
  }
  if (spec.name == "data_weighting")
    return make_data_weighting(get_i(spec, "n", 40), get_i(spec, "q", 60),
                               get_d(spec, "corrupt_frac", 0.5), get_seed(spec),
                               get_i(spec, "d", 5), get_d(spec, "rho2", 0.1),
                               get_d(spec, "label_noise", 0.1));
  throw std::invalid_argument("problem.name: unknown problem '" + spec.name + "'");
}

ProblemGen make_problem_gen(ProblemSpec spec) {
  return [spec = std::move(spec)](uint64_t seed) mutable {
    spec.params["seed"] = std::to_string(seed);
    return make_problem(spec);
  };
}

}  // namespace bilevel
