#ifndef STUDYREC_ERROR_HPP
#define STUDYREC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace studyrec {

/// All rejection paths in the library throw this (or a subclass) with a
/// human-readable reason.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by compute_similarities when not a single candidate is rankable.
/// Predictors catch it and route every test item to the mean fallback.
class NoRankableCandidates : public Error {
public:
    explicit NoRankableCandidates(const std::string& what) : Error(what) {}
};

}  // namespace studyrec

#endif
