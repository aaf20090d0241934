// Umbrella header: pulls in the whole band-matrix laboratory.
#pragma once

#include <bandwig/version.hpp>
#include <bandwig/errors.hpp>
#include <bandwig/stats.hpp>
#include <bandwig/rng.hpp>
#include <bandwig/threads.hpp>
#include <bandwig/io.hpp>
#include <bandwig/lattice.hpp>
#include <bandwig/kernel.hpp>
#include <bandwig/analytics.hpp>
#include <bandwig/quadrature.hpp>
#include <bandwig/ensemble.hpp>
#include <bandwig/spectral.hpp>
#include <bandwig/susy.hpp>
#include <bandwig/grassmann.hpp>
#include <bandwig/harness.hpp>
