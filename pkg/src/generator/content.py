"""
Text payloads for synthetic trajectories.

Everything here is assembled from fixed word pools and integer arithmetic
on RNG draws, so outputs are reproducible for a given stream.
"""
import json
from typing import List, Optional, Sequence, Tuple

from src.generator.rng import Xoshiro256StarStar

COMPANIES: Tuple[Tuple[str, str], ...] = (
    ("AAPL", "Apple"),
    ("MSFT", "Microsoft"),
    ("GOOGL", "Alphabet"),
    ("AMZN", "Amazon"),
    ("NVDA", "Nvidia"),
    ("TSLA", "Tesla"),
    ("META", "Meta Platforms"),
    ("JPM", "JPMorgan Chase"),
    ("XOM", "Exxon Mobil"),
    ("NFLX", "Netflix"),
    ("AMD", "Advanced Micro Devices"),
    ("INTC", "Intel"),
    ("KO", "Coca-Cola"),
    ("DIS", "Walt Disney"),
    ("BA", "Boeing"),
    ("PFE", "Pfizer"),
)

PROMPT_CATEGORIES = ("share_price", "comparison", "analysis", "forecast", "news", "trends")
PROMPT_STYLES = ("poor", "good", "strict")
TOOL_ERROR_TYPES = ("timeout", "rate_limited", "http_500", "tool_exception")

WORDS = (
    "revenue", "margin", "guidance", "dividend", "buyback", "earnings", "quarter", "outlook",
    "analyst", "upgrade", "downgrade", "supply", "chain", "demand", "inventory", "pricing",
    "regulator", "lawsuit", "settlement", "merger", "acquisition", "spinoff", "layoffs",
    "hiring", "factory", "shipment", "delivery", "subscriber", "churn", "advertising", "cloud",
    "chip", "battery", "refinery", "pipeline", "vaccine", "trial", "approval", "recall",
    "strike", "union", "tariff", "export", "import", "currency", "inflation", "interest",
    "treasury", "yield", "volatility", "momentum", "resistance", "support", "breakout",
    "rally", "selloff", "rebound", "plunge", "surge", "stall", "forecast", "estimate",
    "consensus", "beat", "miss", "record", "slowdown", "expansion", "contraction", "capex",
    "patent", "licensing", "partnership", "contract", "backlog", "orders", "warehouse",
    "logistics", "retail", "wholesale", "streaming", "gaming", "satellite", "robotics",
    "automation", "software", "hardware", "datacenter", "energy", "solar", "turbine", "crude",
    "gasoline", "airline", "aircraft", "engine", "defense", "insurance", "lending", "deposit",
    "mortgage", "credit", "default", "rating", "bond", "equity", "float", "insider",
    "filing", "audit", "restatement", "executive", "founder", "board", "activist", "proxy",
    "vote", "election", "stimulus", "budget", "deficit", "weather", "drought", "harvest",
    "shortage", "surplus", "bottleneck", "backorder", "launch", "preview", "keynote",
    "conference", "webcast", "roadmap", "milestone", "benchmark", "index", "sector",
    "peers", "valuation", "multiple", "premium", "discount", "target", "upside", "downside",
)

SOURCES = ("Reuters", "Bloomberg", "MarketWatch", "Barron's", "CNBC", "Financial Times")
_NOISE_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


def pick_words(rng: Xoshiro256StarStar, count: int) -> List[str]:
    return rng.sample(WORDS, count)


def money(cents: int) -> str:
    return f"{cents // 100}.{cents % 100:02d}"


def user_prompt(category: str, style: str, ticker: str, company: str) -> str:
    asks = {
        "share_price": f"What is the current share price of {company} ({ticker})?",
        "comparison": f"How does {company} ({ticker}) compare with its sector peers this week?",
        "analysis": f"Give me an analysis of recent {ticker} performance.",
        "forecast": f"Where could {company} stock trade next month?",
        "news": f"What is the latest news on {company}?",
        "trends": f"Describe the price trend of {ticker} over the last two weeks.",
    }
    prefix = {
        "poor": "",
        "good": "You are a careful financial assistant. ",
        "strict": "You are a financial assistant. Use each tool at most once. Stop when answered. ",
    }
    return prefix[style] + asks[category]


def plan_text(rng: Xoshiro256StarStar, category: str, company: str) -> str:
    return f"Plan for the {category.replace('_', ' ')} request on {company}: " + " ".join(pick_words(rng, 6))


def routing_text(rng: Xoshiro256StarStar, tool: str, ticker: str) -> str:
    return " ".join(pick_words(rng, 5)) + f" via {tool} ({ticker})"


def agent_report(rng: Xoshiro256StarStar, agent: str, ticker: str) -> str:
    score = rng.between(10, 99)
    return " ".join(pick_words(rng, 7)) + f" ({agent} on {ticker}, {score}%)"


def draft_text(rng: Xoshiro256StarStar) -> str:
    return "Draft: " + " ".join(pick_words(rng, 9))


def final_answer(rng: Xoshiro256StarStar, company: str, ticker: str) -> str:
    return (
        f"Summary: {company} ({ticker}) " + " ".join(pick_words(rng, 8))
        + f". Overall view {rng.choice(('positive', 'neutral', 'cautious'))}."
    )


def news_result(rng: Xoshiro256StarStar, company: str, words: Sequence[str] = ()) -> str:
    words = list(words) or pick_words(rng, 8)
    day = rng.between(1, 28)
    return f"Headline: {company} " + " ".join(words) + f" ({rng.choice(SOURCES)}, May {day})"


def price_result(rng: Xoshiro256StarStar, ticker: str) -> str:
    cents = rng.between(1_000, 90_000)
    volume = rng.between(200_000, 9_000_000)
    change = rng.between(-500, 500)
    sign = "-" if change < 0 else "+"
    return (
        f"{ticker} last trade {money(cents)} USD, volume {volume}, "
        f"change {sign}{abs(change) // 100}.{abs(change) % 100:02d}%"
    )


def timeseries_result(
    rng: Xoshiro256StarStar,
    ticker: str,
    start_day: int,
    points: int,
    base_cents: Optional[int] = None
) -> str:
    """Compact daily OHLC-style JSON series starting on the given day of May 2024."""
    cents = base_cents if base_cents is not None else rng.between(2_000, 60_000)
    series = []
    for i in range(points):
        open_cents = cents
        cents = max(100, cents + rng.between(-400, 400))
        series.append({
            "date": f"2024-05-{start_day + i:02d}",
            "open": float(money(open_cents)),
            "close": float(money(cents)),
            "volume": rng.between(100_000, 5_000_000),
        })
    return json.dumps({"symbol": ticker, "interval": "1d", "series": series}, separators=(",", ":"))


def tool_input(tool_role: str, ticker: str) -> str:
    if tool_role == "search":
        return json.dumps({"query": f"{ticker} latest news"})
    if tool_role == "timeseries":
        return json.dumps({"symbol": ticker, "period": "1mo"})
    return json.dumps({"symbol": ticker})


def perturb(rng: Xoshiro256StarStar, text: str, noise_ppm: int) -> str:
    """Replace each character with probability noise_ppm / 1e6."""
    chars = list(text)
    for i in range(len(chars)):
        if rng.chance_ppm(noise_ppm):
            chars[i] = rng.choice(_NOISE_ALPHABET)
    return "".join(chars)
