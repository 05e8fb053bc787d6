#pragma once

#include "errors.hpp"
#include "lattice.hpp"
#include "ffunc.hpp"
#include "algebra.hpp"
#include "interaction.hpp"
#include "dynamics.hpp"
#include "transform.hpp"
#include "factorize.hpp"
#include "summability.hpp"
#include "generators.hpp"
