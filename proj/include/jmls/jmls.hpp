#pragma once

#include "jmls/linalg.hpp"
#include "jmls/mixture.hpp"
#include "jmls/model.hpp"
#include "jmls/likelihood.hpp"
#include "jmls/forward.hpp"
#include "jmls/backward.hpp"
#include "jmls/smoother.hpp"
#include "jmls/oracle.hpp"
#include "jmls/presets.hpp"
#include "jmls/io.hpp"
#include "jmls/reproduce.hpp"
