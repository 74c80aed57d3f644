#pragma once

#include <stdexcept>
#include <string>

namespace sspa {

// One error type for the whole toolkit; `kind` drives CLI exit codes.
class Error : public std::runtime_error {
public:
  enum class Kind {
    parse,       // bad model text (has line/col)
    name,        // unknown or duplicate identifier
    rate,        // non-positive rate literal
    ill_founded, // identifier unfolding never reaches a choice or nil
    budget,      // state-space or matrix-dimension budget exceeded
    reducible,   // chain is not a single strongly connected component
    unclosable,  // component has a passive label no kappa can close
    assignment,  // variable evaluation with a missing label
    precondition,
    internal,
  };

  Error(Kind kind, std::string message, int line = -1, int column = -1)
      : std::runtime_error(std::move(message)), kind(kind), line(line), column(column) {}

  Kind kind;
  int line;
  int column;
};

} // namespace sspa
