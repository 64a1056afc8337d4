// named finite-difference gradient scenarios (double precision, h = 1e-5)
#ifndef EDENVFI_GRADCHECK_SUITE_HPP
#define EDENVFI_GRADCHECK_SUITE_HPP

#include <string>
#include <vector>

namespace edenvfi {

// canonical scenario names in run order
const std::vector<std::string>& gradcheck_names();

// max relative gradient error over the scenario's probe tensors; accepts the
// aliases "edsc" (edsc_apply) and "model" (end_to_end)
double run_gradcheck(const std::string& name);

} // namespace edenvfi

#endif
