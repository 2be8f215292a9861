#pragma once

#include <cstddef>
#include <exception>

namespace rmtshrink::detail {

// Exceptions must not escape an OpenMP region; keep the one from the lowest
// index so the reported failure does not depend on scheduling.
class FirstError {
 public:
  void capture(std::ptrdiff_t index) {
#pragma omp critical(rmtshrink_first_error)
    {
      if (!error_ || index < index_) {
        error_ = std::current_exception();
        index_ = index;
      }
    }
  }

  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
  std::ptrdiff_t index_ = 0;
};

}  // namespace rmtshrink::detail
