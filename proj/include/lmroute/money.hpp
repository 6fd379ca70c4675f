#pragma once

#include <cstdint>
#include <string>

namespace lmroute {

// Money is an integer count of picodollars (1e-12 USD). Table prices are quoted
// in dollars per million tokens, so a price with up to six decimal places maps
// to an exact integer number of picodollars per token and per-query costs stay
// exactly linear in token counts. Conversion to decimal dollars happens only at
// report boundaries.
using Money = std::int64_t;

inline constexpr Money kPicosPerDollar = 1'000'000'000'000LL;

// Dollars-per-million-tokens -> picodollars per token (the two scales coincide
// up to a factor of 1e6: 0.267 $/Mtok == 267000 pico$/tok).
Money token_price_from_dollars_per_million(double dollars_per_million);

// Inverse of the above, for serialization.
double token_price_to_dollars_per_million(Money picos_per_token);

double money_to_dollars(Money amount);
Money money_from_dollars(double dollars);

// Exact decimal rendering, e.g. 750000000000 -> "0.75".
std::string money_to_string(Money amount);

}  // namespace lmroute
