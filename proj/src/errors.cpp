#include "fidsearch/errors.hpp"

namespace fidsearch {

void throw_validation(const std::string& what) { throw ValidationError(what); }
void throw_io(const std::string& what) { throw IoError(what); }

}  // namespace fidsearch
