#ifndef RSB_ERRORS_HPP
#define RSB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rsb
{

// Root of every numerical failure raised by the library. Precondition
// violations on plain arguments use std::invalid_argument instead.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Theta series hit the hard truncation cap.
class nonconvergent_series : public error
{
public:
    using error::error;
};

// An argument that must avoid Z + tau Z sits on (or within tolerance of) it.
class pole_at_lattice_point : public error
{
public:
    using error::error;
};

// Weight vector with lambda_i - lambda_j on the lattice.
class degenerate_weights : public error
{
public:
    using error::error;
};

// Matrix inversion refused: condition estimate above threshold.
class near_singular : public error
{
public:
    using error::error;
};

// v != u + sum(lambda - mu).
class shift_mismatch : public error
{
public:
    using error::error;
};

// Newton solver exhausted its multistart budget.
class no_convergence : public error
{
public:
    using error::error;
};

// Solver converged to a point violating genericity.
class degenerate_solution : public error
{
public:
    using error::error;
};

// Could not route an integration path away from the zeros of theta.
class path_through_zero : public error
{
public:
    using error::error;
};

} // namespace rsb

#endif
