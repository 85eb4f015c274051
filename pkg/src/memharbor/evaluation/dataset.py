"""Seeded synthetic conversations with gold-labelled recall queries.

Every user gets a fixed profile (name, city, employer, ...) and takes part in
five consecutive conversations. Each conversation states one profile fact and
ends with a question about it; the remaining turns are chit-chat or other
facts from the same profile, so earlier conversations can also hold the
answer.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from ..model import Category, Intent, MemoryStore, save_store
from ..query import QueryProcessor

BASE_TIME = 1_700_000_000
CONVERSATION_GAP = 6 * 3600
TURN_GAP = 60
CONVERSATIONS_PER_USER = 5
MIN_TURNS, EXTRA_TURNS, EXTRA_P = 5, 10, 0.35
DISTRACTOR_P = 0.4

CATEGORY_SHARES: dict[Category, float] = {
    Category.PERSONAL_INFO: 0.25,
    Category.PROFESSIONAL_INFO: 0.20,
    Category.PREFERENCES_INTERESTS: 0.25,
    Category.GOALS_ASPIRATIONS: 0.20,
    Category.CONTEXTUAL: 0.10,
}

DATASET_FILE = "dataset.jsonl"
STORE_FILE = "memories.store"

_VALUES = {
    "person": "Alice Bob Carol David Emma Frank Grace Henry Isabel Jack Karen Liam Maria Noah "
              "Olivia Peter Quinn Rachel Sofia Thomas Uma Victor Wendy Xavier Yara Zoe".split(),
    "city": ["Paris", "London", "Tokyo", "Berlin", "Madrid", "Rome", "Lisbon", "Dublin", "Toronto",
             "Sydney", "Seattle", "Boston", "Chicago", "Austin", "Denver", "New York", "Oslo",
             "Vienna", "Prague", "Amsterdam"],
    "place": ["Iceland", "Japan", "Italy", "Peru", "Canada", "Mexico", "Kyoto", "Barcelona"],
    "org": ["Google", "Microsoft", "Amazon", "Apple", "Intel", "Netflix", "Spotify", "IBM",
            "Nvidia", "Adobe", "Siemens", "Airbus", "City Hospital", "Acme Corp"],
    "job": ["engineer", "teacher", "nurse", "designer", "accountant", "chef", "lawyer",
            "pharmacist", "architect", "journalist"],
    "food": ["sushi", "pizza", "ramen", "tacos", "curry", "pasta", "dumplings"],
    "hobby": ["hiking", "chess", "yoga", "cooking", "painting", "gardening", "photography",
              "cycling", "surfing", "knitting", "birdwatching"],
    "music": ["jazz", "classical music", "hip hop", "country music", "blues"],
    "skill": ["piano", "guitar", "Spanish", "French", "Mandarin", "Python", "machine learning",
              "public speaking", "statistics"],
    "topic": ["the budget", "the project deadline", "our vacation plans", "the new apartment",
              "the job interview", "the marathon", "the book club", "climate change"],
}


@dataclass(frozen=True)
class Question:
    text: str
    intent: Intent
    entities: tuple[str, ...] = ()  # profile keys whose values appear in the question


@dataclass(frozen=True)
class Slot:
    name: str
    category: Category
    statements: tuple[str, ...]
    questions: tuple[Question, ...]


_Q = Question
_SEEK = Intent.INFORMATION_SEEKING

SLOTS: tuple[Slot, ...] = (
    Slot("name", Category.PERSONAL_INFO,
         ("My name is {name}.", "Please call me {name}, that is my name."),
         (_Q("What is my name?", _SEEK), _Q("Do you remember my name?", _SEEK))),
    Slot("home", Category.PERSONAL_INFO,
         ("I live in {home}.", "I grew up elsewhere but I live in {home} now."),
         (_Q("Where do I live?", _SEEK), _Q("Which city do I live in?", _SEEK))),
    Slot("friend", Category.PERSONAL_INFO,
         ("My friend {friend} lives in {friend_city}.",),
         (_Q("Where does {friend} live?", _SEEK, ("friend",)),)),
    Slot("employer", Category.PROFESSIONAL_INFO,
         ("I work at {employer}.", "I joined {employer} last year and I still work there."),
         (_Q("Where do I work?", _SEEK), _Q("Which company do I work for?", _SEEK))),
    Slot("job", Category.PROFESSIONAL_INFO,
         ("My job is {job}.", "I work as a {job}, it is my profession."),
         (_Q("What is my job?", _SEEK), _Q("What is my profession?", _SEEK))),
    Slot("food", Category.PREFERENCES_INTERESTS,
         ("My favorite food is {food}.", "I love eating {food}."),
         (_Q("What is my favorite food?", _SEEK), _Q("Which food do I love?", _SEEK))),
    Slot("hobby", Category.PREFERENCES_INTERESTS,
         ("I enjoy {hobby} on weekends.", "My favorite hobby is {hobby}."),
         (_Q("What is my hobby?", _SEEK), _Q("What do I enjoy on weekends?", _SEEK))),
    Slot("music", Category.PREFERENCES_INTERESTS,
         ("I love listening to {music}.",),
         (_Q("What music do I like listening to?", _SEEK),)),
    Slot("skill", Category.GOALS_ASPIRATIONS,
         ("I want to learn {skill} next year.", "My goal is to learn {skill}."),
         (_Q("What do I want to learn?", _SEEK), _Q("What is my learning goal?", _SEEK))),
    Slot("trip", Category.GOALS_ASPIRATIONS,
         ("My dream is to visit {trip} someday.", "I hope to travel to {trip} next year."),
         (_Q("Where do I hope to travel?", _SEEK),
          _Q("What did I say about visiting {trip}?", _SEEK, ("trip",)))),
    Slot("topic", Category.CONTEXTUAL,
         ("Earlier we discussed {topic} in detail.", "We talked about {topic} for a while."),
         (_Q("What did we discuss earlier?", Intent.CONTEXTUAL_CLARIFICATION),
          _Q("Remind me what we talked about last time.", Intent.CONTEXTUAL_CLARIFICATION))),
)

_SLOT_BY_NAME = {s.name: s for s in SLOTS}

FILLERS = (
    "Hi, how are you?",
    "Good morning!",
    "The weather is nice today.",
    "Thanks, that sounds good.",
    "I had a long day.",
    "Let me think about it.",
    "Haha, that is funny.",
    "I am a bit tired today.",
    "Can you help me with something?",
    "Okay, see you later.",
)


@dataclass(frozen=True)
class Turn:
    id: str
    text: str
    timestamp: int
    slot: str | None = None


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    user_id: str
    turns: tuple[Turn, ...]


@dataclass(frozen=True)
class EvalQuery:
    conversation_id: str
    user_id: str
    query: str
    timestamp: int
    gold_entities: frozenset[str]
    gold_intent: Intent
    gold_answer: str
    gold_memory_ids: frozenset[str]
    category: Category

    def __post_init__(self):
        if not self.gold_answer:
            raise ValueError("gold answer must be nonempty")

    def to_json(self) -> str:
        obj = asdict(self)
        obj["gold_entities"] = sorted(self.gold_entities)
        obj["gold_memory_ids"] = sorted(self.gold_memory_ids)
        obj["gold_intent"] = self.gold_intent.value
        obj["category"] = self.category.value
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EvalQuery":
        obj = json.loads(line)
        return cls(
            conversation_id=obj["conversation_id"],
            user_id=obj["user_id"],
            query=obj["query"],
            timestamp=int(obj["timestamp"]),
            gold_entities=frozenset(obj["gold_entities"]),
            gold_intent=Intent.parse(obj["gold_intent"]),
            gold_answer=obj["gold_answer"],
            gold_memory_ids=frozenset(obj["gold_memory_ids"]),
            category=Category.parse(obj["category"]),
        )


@dataclass
class Dataset:
    conversations: list[Conversation] = field(default_factory=list)
    queries: list[EvalQuery] = field(default_factory=list)


def allocate_categories(n: int, rng: random.Random) -> list[Category]:
    """Exact-share category labels (largest remainder), in random order."""
    raw = {c: share * n for c, share in CATEGORY_SHARES.items()}
    counts = {c: int(v) for c, v in raw.items()}
    leftover = n - sum(counts.values())
    by_remainder = sorted(CATEGORY_SHARES, key=lambda c: (-(raw[c] - counts[c]), list(CATEGORY_SHARES).index(c)))
    for c in by_remainder[:leftover]:
        counts[c] += 1
    labels = [c for c in CATEGORY_SHARES for _ in range(counts[c])]
    rng.shuffle(labels)
    return labels


def draw_turn_count(rng: random.Random) -> int:
    return MIN_TURNS + sum(rng.random() < EXTRA_P for _ in range(EXTRA_TURNS))


def _profile(rng: random.Random) -> dict[str, str]:
    people = rng.sample(_VALUES["person"], 2)
    return {
        "name": people[0],
        "friend": people[1],
        "home": rng.choice(_VALUES["city"]),
        "friend_city": rng.choice(_VALUES["city"]),
        "employer": rng.choice(_VALUES["org"]),
        "job": rng.choice(_VALUES["job"]),
        "food": rng.choice(_VALUES["food"]),
        "hobby": rng.choice(_VALUES["hobby"]),
        "music": rng.choice(_VALUES["music"]),
        "skill": rng.choice(_VALUES["skill"]),
        "trip": rng.choice(_VALUES["place"]),
        "topic": rng.choice(_VALUES["topic"]),
    }


def generate_dataset(seed: int, n_conversations: int = 1000) -> Dataset:
    if n_conversations < 1:
        raise ValueError("n_conversations must be >= 1")
    rng = random.Random(seed)
    categories = allocate_categories(n_conversations, rng)
    data = Dataset()
    profiles: dict[str, dict[str, str]] = {}
    history: dict[str, list[Turn]] = {}

    for i, category in enumerate(categories):
        user = f"u{i // CONVERSATIONS_PER_USER:04d}"
        if user not in profiles:
            profiles[user] = _profile(rng)
            history[user] = []
        profile = profiles[user]
        conv_id = f"c{i:05d}"
        start = BASE_TIME + i * CONVERSATION_GAP

        slot = rng.choice([s for s in SLOTS if s.category is category])
        others = [s for s in SLOTS if s is not slot]
        n_turns = draw_turn_count(rng)
        fact_at = rng.randrange(n_turns)
        turns = []
        for j in range(n_turns):
            if j == fact_at:
                used, text = slot, rng.choice(slot.statements).format(**profile)
            elif rng.random() < DISTRACTOR_P:
                used = rng.choice(others)
                text = rng.choice(used.statements).format(**profile)
            else:
                used, text = None, rng.choice(FILLERS)
            turns.append(Turn(f"{conv_id}-t{j:02d}", text, start + j * TURN_GAP,
                              used.name if used else None))
        conv = Conversation(conv_id, user, tuple(turns))
        history[user].extend(turns)

        question = rng.choice(slot.questions)
        query_time = start + n_turns * TURN_GAP
        gold_ids = frozenset(t.id for t in history[user] if t.slot == slot.name and t.timestamp <= query_time)
        data.conversations.append(conv)
        data.queries.append(EvalQuery(
            conversation_id=conv_id,
            user_id=user,
            query=question.text.format(**profile),
            timestamp=query_time,
            gold_entities=frozenset(profile[k] for k in question.entities),
            gold_intent=question.intent,
            gold_answer=turns[fact_at].text,
            gold_memory_ids=gold_ids,
            category=category,
        ))
    return data


def build_store(data: Dataset, processor: QueryProcessor | None = None) -> MemoryStore:
    processor = processor or QueryProcessor()
    store = MemoryStore(processor.dimension)
    for conv in data.conversations:
        for t in conv.turns:
            store.ingest(processor.make_record(t.id, conv.user_id, t.text, t.timestamp,
                                               (conv.conversation_id,)))
    return store


def dump_queries(queries: Iterable[EvalQuery]) -> str:
    return "".join(q.to_json() + "\n" for q in queries)


def load_queries(path: str | Path) -> list[EvalQuery]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [EvalQuery.from_json(line) for line in lines if line.strip()]


def write_dataset(data: Dataset, out_dir: str | Path,
                  processor: QueryProcessor | None = None) -> tuple[Path, Path]:
    """Write the query file and the matching memory store; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path, store_path = out / DATASET_FILE, out / STORE_FILE
    dataset_path.write_text(dump_queries(data.queries), encoding="utf-8")
    save_store(build_store(data, processor), store_path)
    return dataset_path, store_path


def slot_of(name: str) -> Slot:
    return _SLOT_BY_NAME[name]
