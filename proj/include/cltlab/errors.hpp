#pragma once

#include <stdexcept>
#include <string>

namespace cltlab {

// All failures carry a stable machine-readable name so the CLI can emit
// structured error records.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define CLTLAB_DEFINE_ERROR(Name)                         \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& what)                \
        : Error(#Name, what) {}                           \
  }

CLTLAB_DEFINE_ERROR(NonStochastic);
CLTLAB_DEFINE_ERROR(NegativeEntry);
CLTLAB_DEFINE_ERROR(ReducibleChain);
CLTLAB_DEFINE_ERROR(NoSpectralGap);
CLTLAB_DEFINE_ERROR(DimensionMismatch);
CLTLAB_DEFINE_ERROR(WeightBelowOne);
CLTLAB_DEFINE_ERROR(SingularSystem);
CLTLAB_DEFINE_ERROR(DegenerateVariance);
CLTLAB_DEFINE_ERROR(AmbiguousDominant);
CLTLAB_DEFINE_ERROR(NormalizationFailure);
CLTLAB_DEFINE_ERROR(EigenvalueOnContour);
CLTLAB_DEFINE_ERROR(EnclosureViolation);
CLTLAB_DEFINE_ERROR(SingularResolvent);
CLTLAB_DEFINE_ERROR(ContractionFailure);
CLTLAB_DEFINE_ERROR(NoContractingPower);
CLTLAB_DEFINE_ERROR(IndexOutOfRange);
CLTLAB_DEFINE_ERROR(BadInitialLaw);
CLTLAB_DEFINE_ERROR(SamplerFailure);
CLTLAB_DEFINE_ERROR(TooFewPaths);
CLTLAB_DEFINE_ERROR(TooFewSamples);
CLTLAB_DEFINE_ERROR(NoLattice);
CLTLAB_DEFINE_ERROR(BudgetExceeded);
CLTLAB_DEFINE_ERROR(NonPositiveDistance);
CLTLAB_DEFINE_ERROR(SpectralGapLost);
CLTLAB_DEFINE_ERROR(ConfigInvalid);
CLTLAB_DEFINE_ERROR(IoFailure);

#undef CLTLAB_DEFINE_ERROR

}  // namespace cltlab
