#ifndef CONVLAT_ERRORS_HPP
#define CONVLAT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace convlat {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define CONVLAT_DEFINE_ERROR(Name)                          \
  struct Name : Error {                                     \
    explicit Name(const std::string& msg) : Error(msg) {}   \
  }

// lattice
CONVLAT_DEFINE_ERROR(CyclicLatticeError);
CONVLAT_DEFINE_ERROR(UnreachableStateError);
CONVLAT_DEFINE_ERROR(NoFinalStateError);
CONVLAT_DEFINE_ERROR(InvalidLatticeError);
CONVLAT_DEFINE_ERROR(UnknownTokenError);

// n-gram / model files
CONVLAT_DEFINE_ERROR(CountMismatchError);
CONVLAT_DEFINE_ERROR(FormatVersionMismatchError);
CONVLAT_DEFINE_ERROR(ShapeMismatchError);

// training
CONVLAT_DEFINE_ERROR(ConfigError);
CONVLAT_DEFINE_ERROR(NumericalDivergenceError);

// rescoring
CONVLAT_DEFINE_ERROR(ExpansionBudgetError);
CONVLAT_DEFINE_ERROR(EmptyResultError);
CONVLAT_DEFINE_ERROR(BudgetExceededError);

// context / concatenation
CONVLAT_DEFINE_ERROR(VocabMismatchError);
CONVLAT_DEFINE_ERROR(CycleCreatedError);
CONVLAT_DEFINE_ERROR(TagNotFoundError);
CONVLAT_DEFINE_ERROR(MissingIntentError);
CONVLAT_DEFINE_ERROR(EmptyCorpusError);

#undef CONVLAT_DEFINE_ERROR

/// Text parse failure; remembers the 1-based line it happened on (0 = unknown).
struct ParseError : Error {
  int line = 0;
  explicit ParseError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
};

}  // namespace convlat

#endif  // CONVLAT_ERRORS_HPP
