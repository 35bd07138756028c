#include "kinlab/errors.hpp"

#include <sstream>

namespace kinlab {

namespace {

std::string degenerate_message(int cell, double rho, double T)
{
  std::ostringstream os;
  os << "degenerate moments";
  if (cell >= 0) os << " at cell " << cell;
  os << " (rho = " << rho << ", T = " << T << ")";
  return os.str();
}

std::string condition_message(double cond)
{
  std::ostringstream os;
  os << "ill-conditioned invariant basis (condition number " << cond << ")";
  return os.str();
}

std::string blowup_message(double t)
{
  std::ostringstream os;
  os << "non-finite values in distribution at t = " << t;
  return os.str();
}

}  // namespace

DegenerateMomentError::DegenerateMomentError(int cell_, double rho_, double T_)
    : Error(degenerate_message(cell_, rho_, T_))
    , cell(cell_)
    , rho(rho_)
    , T(T_)
{
}

IllConditionedBasisError::IllConditionedBasisError(double cond)
    : NumericalError(condition_message(cond))
    , condition_number(cond)
{
}

SolvabilityError::SolvabilityError(double ratio, const std::string& what)
    : Error(what)
    , relative_projection(ratio)
{
}

BlowUpError::BlowUpError(double t)
    : NumericalError(blowup_message(t))
    , time(t)
{
}

}  // namespace kinlab
