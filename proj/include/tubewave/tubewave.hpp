#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "fft.hpp"
#include "damping.hpp"
#include "linalg.hpp"
#include "operators.hpp"
#include "spectral_scan.hpp"
#include "quasimode_lab.hpp"
#include "wave_evolver.hpp"
#include "reports.hpp"
#include "cli.hpp"
