#pragma once

#include <sepdict/core.hpp>
#include <sepdict/dictionary_io.hpp>
#include <sepdict/imaging.hpp>
#include <sepdict/manifold.hpp>
#include <sepdict/objective.hpp>
#include <sepdict/optimizer.hpp>
#include <sepdict/pgm.hpp>
#include <sepdict/sparse_coding.hpp>
