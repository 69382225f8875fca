//! Hand-written inventory of the synthetic Meet & Greet / Simon Says domain.

/// (intent, goal-oriented, paraphrase cores). `{n}` is a child's name slot.
pub(crate) const VERBAL_INTENTS: &[(&str, bool, &[&str])] = &[
    ("greet", true, &["hi", "hello", "hey", "hi there", "hello robot", "hey there", "good morning", "hiya", "howdy"]),
    (
        "my_name_is",
        true,
        &["my name is {n}", "i am {n}", "i'm {n}", "call me {n}", "it's {n}", "{n}", "my name's {n}", "they call me {n}"],
    ),
    (
        "wrong_name",
        true,
        &[
            "that's not my name",
            "no that's wrong",
            "you said it wrong",
            "that is not my name",
            "wrong name",
            "no my name is different",
            "you got my name wrong",
            "nope that's not it",
        ],
    ),
    (
        "doing_good",
        true,
        &["i am good", "i'm great", "good", "i feel good", "pretty good", "i'm doing great", "awesome", "i am happy"],
    ),
    (
        "doing_bad",
        true,
        &["not good", "i am sad", "i feel bad", "i'm not feeling well", "bad", "i'm upset", "terrible", "not so great"],
    ),
    (
        "doing_okay",
        true,
        &["i am okay", "okay i guess", "i'm fine", "fine", "so so", "i am alright", "kind of okay", "i'm ok"],
    ),
    ("affirm", true, &["yes", "yeah", "sure", "yep", "of course", "yes please", "that's right", "ok sure", "uh huh"]),
    ("deny", true, &["no", "nope", "no thanks", "not really", "i don't want to", "nah", "no way", "not now"]),
    (
        "goodbye",
        true,
        &["bye", "goodbye", "see you", "bye bye", "see you later", "i have to go", "talk to you later", "bye robot"],
    ),
    (
        "thank_you",
        true,
        &[
            "thank you",
            "thanks",
            "thanks a lot",
            "thank you so much",
            "thanks robot",
            "that was fun thanks",
            "cool thanks",
            "thank you very much",
        ],
    ),
    (
        "want_to_play",
        true,
        &[
            "let's play simon says",
            "i want to play",
            "can we play a game",
            "play simon says",
            "let's play a game",
            "i wanna play",
            "can we play simon says",
            "let's play",
        ],
    ),
    (
        "ready",
        true,
        &["i'm ready", "ready", "i am ready", "let's go", "ready to go", "start the game", "go ahead", "i'm ready now"],
    ),
    (
        "not_ready",
        true,
        &["not ready", "wait", "hold on", "i'm not ready", "give me a second", "one minute", "wait a bit", "not yet"],
    ),
    (
        "ask_rules",
        true,
        &[
            "how do i play",
            "what are the rules",
            "how does it work",
            "explain the rules",
            "how do you play",
            "what do i do",
            "tell me the rules",
            "i don't know how to play",
        ],
    ),
    (
        "stop_game",
        true,
        &["stop", "i want to stop", "stop the game", "no more", "i'm done", "let's stop", "i quit", "that's enough"],
    ),
    (
        "repeat_please",
        true,
        &[
            "what",
            "say that again",
            "can you repeat that",
            "repeat please",
            "i didn't hear you",
            "what did you say",
            "pardon",
            "again please",
        ],
    ),
    (
        "ask_robot_name",
        false,
        &[
            "what is your name",
            "are you alexa",
            "who are you",
            "what's your name",
            "do you have a name",
            "are you a robot",
            "what are you called",
            "are you siri",
        ],
    ),
    (
        "ask_robot_age",
        false,
        &[
            "how old are you",
            "what is your age",
            "are you old",
            "when is your birthday",
            "how old is the robot",
            "are you a baby",
            "are you a grown up",
            "what age are you",
        ],
    ),
    (
        "talk_colors",
        false,
        &[
            "what is your favorite color",
            "do you like blue",
            "what color do you like",
            "i like purple",
            "my favorite color is red",
            "do you like green",
            "which color is best",
            "purple is my favorite",
        ],
    ),
    (
        "request_joke",
        false,
        &[
            "tell me a joke",
            "say something funny",
            "do you know a joke",
            "make me laugh",
            "tell a joke",
            "another joke",
            "be funny",
            "do you know any jokes",
        ],
    ),
    (
        "complain_bored",
        false,
        &[
            "this is boring",
            "i'm bored",
            "boring",
            "i don't like this",
            "this is not fun",
            "so boring",
            "i want something else",
            "meh",
        ],
    ),
    (
        "ask_help",
        false,
        &["help", "i need help", "help me", "can you help me", "i'm confused", "i don't understand", "what should i do", "i'm lost"],
    ),
    (
        "out_of_scope",
        false,
        &[
            "what's the weather",
            "where is my mom",
            "can you fly",
            "i want pizza",
            "what is two plus two",
            "do you eat food",
            "where do you live",
            "can you drive a car",
        ],
    ),
    (
        "compliment_robot",
        false,
        &["you are cool", "i like you", "you're funny", "you are smart", "you're awesome", "you are my friend", "nice robot", "i love you robot"],
    ),
    (
        "ask_robot_feelings",
        false,
        &[
            "how are you",
            "how are you doing",
            "are you happy",
            "how do you feel",
            "are you okay",
            "how's it going",
            "are you sad",
            "do you have feelings",
        ],
    ),
    (
        "share_pet",
        false,
        &["i have a dog", "my cat is cute", "i have a puppy", "do you like dogs", "my dog is big", "i have two cats", "i like animals", "i have a fish"],
    ),
];

pub(crate) const NAMES: &[&str] = &[
    "oscar", "mia", "leo", "emma", "noah", "zoe", "liam", "ava", "max", "lily", "sam", "ella", "jack", "ruby", "finn", "nora",
];

pub(crate) const PREFIXES: &[&str] = &["", "", "um", "uh", "so", "hmm", "oh"];
pub(crate) const SUFFIXES: &[&str] = &["", "", "!", ".", "now", "haha"];

/// Non-verbal game moves reported by the perception side.
pub(crate) const PHYSICAL_INTENTS: &[&str] = &["did_jump", "did_clap", "did_wave", "did_spin", "did_wrong_move"];

/// (action, base responses).
pub(crate) const ACTIONS: &[(&str, &[&str])] = &[
    ("utter_greet_ask_name", &["hi, what is your name?", "hello friend, what should i call you?", "hey, nice to see you, what is your name?"]),
    (
        "utter_nice_to_meet_ask_how",
        &["nice to meet you, how are you today?", "great name, how are you doing?", "lovely to meet you, how do you feel today?"],
    ),
    ("utter_apologize_ask_name", &["sorry about that, who are you again?", "oops, my mistake, can you tell me once more?", "i am sorry, please say your name once more."]),
    ("utter_glad_ask_play", &["glad to hear it, want to play simon says later?", "that is wonderful, do you want to play a game later?", "happy to hear it, shall we play simon says later?"]),
    ("utter_ok_ask_play", &["okay, maybe a game will help, want to play later?", "alright, do you want to play simon says later?", "fair enough, shall we play a game later?"]),
    ("utter_sorry_ask_play", &["sorry to hear that, maybe a game will cheer you up later?", "oh no, do you want to play simon says later?", "oh dear, shall we play a game later to cheer up?"]),
    ("utter_great_see_you", &["great, see you at the game!", "awesome, i will see you there!", "wonderful, we will play later!"]),
    ("utter_maybe_later", &["no problem, maybe another time.", "that is okay, we can play some other day.", "sure, maybe later then."]),
    ("utter_goodbye", &["goodbye, have a nice day!", "take care, until next time!", "see you later, take care!"]),
    ("utter_youre_welcome", &["you are welcome, bye for now!", "any time, goodbye!", "my pleasure, see you soon!"]),
    (
        "utter_explain_rules",
        &[
            "copy my moves, but only after the magic words, are you ready?",
            "i give a move and you copy it after the magic words, ready?",
            "listen for the magic words and then do the move, are you ready?",
        ],
    ),
    ("utter_take_your_time", &["take your time, tell me when you are ready.", "no rush, let me know when you are ready.", "okay, i will wait, say ready when you are."]),
    ("utter_simon_jump", &["simon says jump!", "simon says jump up high!", "simon says jump like a frog!"]),
    ("utter_simon_clap", &["simon says clap your hands!", "simon says clap clap!", "simon says give a big clap!"]),
    ("utter_simon_wave", &["simon says wave your hand!", "simon says wave hello!", "simon says wave like a star!"]),
    ("utter_simon_spin", &["simon says spin around!", "simon says turn in a circle!", "simon says spin like a top!"]),
    ("utter_good_job", &["good job!", "well done, you did it!", "nice move!"]),
    ("utter_try_again", &["almost, let us try that again.", "not quite, try once more.", "oops, that was a different move, again!"]),
    ("utter_ask_play_again", &["that was fun, do you want to play again?", "want another round?", "shall we play one more time?"]),
    ("utter_thanks_bye", &["thanks for playing, goodbye!", "that was a great game, bye!", "thank you for playing with me, see you!"]),
    ("utter_respond_ask_robot_name", &["i am a robot, you can call me robo.", "my name is robo.", "people call me robo the robot."]),
    ("utter_respond_ask_robot_age", &["i am only two years old in robot years.", "robots do not really have birthdays.", "i am pretty young for a robot."]),
    ("utter_respond_talk_colors", &["i like blue, it is the color of my lights.", "purple and blue are my favorite colors.", "colors are fun, i like them all."]),
    ("utter_respond_request_joke", &["why did the robot cross the road? to recharge!", "what do robots eat? micro chips!", "my battery was too low for a funny one."]),
    ("utter_respond_complain_bored", &["sorry you feel bored, let us keep it fun.", "i will try to make it more fun.", "hang in there, the fun part is coming."]),
    ("utter_respond_ask_help", &["do not worry, i will help you.", "i am here to help, just listen to me.", "it is okay, i will guide you."]),
    ("utter_respond_out_of_scope", &["hmm, i do not know about that.", "that is a good question, but i cannot answer it.", "i am not sure about that one."]),
    ("utter_respond_compliment_robot", &["thank you, you are nice too!", "aw, that makes my lights glow!", "you are cool too!"]),
    ("utter_respond_ask_robot_feelings", &["i am doing great, thanks for asking!", "i feel happy when we talk.", "my circuits feel good today."]),
    ("utter_respond_share_pet", &["pets are wonderful friends!", "i would love to meet your pet.", "animals are so cute!"]),
];

pub(crate) const TEMPLATE_STYLES: &[&str] = &["", "oh, ", "wow, ", "okay, "];

/// First-person words mirrored back as second person when entraining.
pub(crate) const MIRROR: &[(&str, &str)] = &[
    ("i", "you"),
    ("i'm", "you're"),
    ("am", "are"),
    ("my", "your"),
    ("me", "you"),
    ("mine", "yours"),
    ("myself", "yourself"),
];
