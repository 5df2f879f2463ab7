#pragma once

#include <cstddef>
#include <functional>

namespace marginsel {

// Runs body(i) for i in [0, n) on at most `max_in_flight` threads. If any call
// throws, the exception from the lowest failing index is rethrown after all
// workers finish.
void parallel_for(std::size_t n, std::size_t max_in_flight, const std::function<void(std::size_t)>& body);

}  // namespace marginsel
