#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

namespace fbbai {

// Reads an arm feature table: a header row `x1,...,xd` followed by one row of
// d comma-separated reals per arm. Throws DegenerateInput on malformed input.
Eigen::MatrixXd read_arms_csv(std::istream& in);
Eigen::MatrixXd read_arms_csv_file(const std::string& path);

// Reads a parameter vector: reals separated by commas and/or whitespace.
Eigen::VectorXd read_vector(std::istream& in);
Eigen::VectorXd read_vector_file(const std::string& path);

}  // namespace fbbai
