#include "lmroute/money.hpp"

#include <cmath>
#include <cstdlib>

namespace lmroute {

Money token_price_from_dollars_per_million(double dollars_per_million) {
    return static_cast<Money>(std::llround(dollars_per_million * 1e6));
}

double token_price_to_dollars_per_million(Money picos_per_token) {
    return static_cast<double>(picos_per_token) / 1e6;
}

double money_to_dollars(Money amount) {
    return static_cast<double>(amount) / static_cast<double>(kPicosPerDollar);
}

Money money_from_dollars(double dollars) {
    return static_cast<Money>(std::llround(dollars * static_cast<double>(kPicosPerDollar)));
}

std::string money_to_string(Money amount) {
    const bool negative = amount < 0;
    const Money magnitude = negative ? -amount : amount;
    const Money whole = magnitude / kPicosPerDollar;
    Money frac = magnitude % kPicosPerDollar;

    std::string out = negative ? "-" : "";
    out += std::to_string(whole);
    if (frac != 0) {
        std::string digits(12, '0');
        Money rest = frac;
        for (int i = 11; i >= 0; --i) {
            digits[static_cast<std::size_t>(i)] = static_cast<char>('0' + rest % 10);
            rest /= 10;
        }
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += "." + digits;
    }
    return out;
}

}  // namespace lmroute
