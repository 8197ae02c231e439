#pragma once

#include "oldroyd/calculus.hpp"
#include "oldroyd/config.hpp"
#include "oldroyd/driver.hpp"
#include "oldroyd/energy.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/grid.hpp"
#include "oldroyd/initial.hpp"
#include "oldroyd/io.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/norms.hpp"
#include "oldroyd/picard.hpp"
#include "oldroyd/transport.hpp"
