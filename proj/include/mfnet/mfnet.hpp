#pragma once

#include "mfnet/approx.hpp"
#include "mfnet/calculus.hpp"
#include "mfnet/complexity.hpp"
#include "mfnet/datagen.hpp"
#include "mfnet/errors.hpp"
#include "mfnet/io.hpp"
#include "mfnet/net.hpp"
#include "mfnet/norms.hpp"
#include "mfnet/train.hpp"
#include "mfnet/tree.hpp"
