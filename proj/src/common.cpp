#include "nsp/common.hpp"

#include <omp.h>

namespace nsp {

int resolve_jobs(int jobs) { return jobs > 0 ? jobs : omp_get_max_threads(); }

}  // namespace nsp
