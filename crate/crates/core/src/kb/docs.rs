//! Prompt text for the knowledge-base environment.
//!
//! [`TOOL_DOCS`] is the only copy of the tool cards; both the prompt builder
//! and the `tools` subcommand print it verbatim.

pub const TOOL_DOCS: &str = "\
get_relations(variable) -> list of relations
The argument is an entity from the question or a variable such as #0 (a set of entities produced earlier). Lists every relation leading out of it, so you can decide which edge to follow next. Example: get_relations(Barack_Obama) lists the outgoing relations of Barack_Obama. Pass only an entity or a variable, nothing else.
Prerequisite: n/a

get_neighbors(variable, relation) -> variable
Follows the relation from the variable and returns a new variable holding every entity at the other end. The relation must come from an earlier get_relations call on the same argument. Example: get_neighbors(Barack_Obama, people.person.profession) yields Obama's professions.
Prerequisite: get_relations

get_attributes(variable) -> list of attributes
Lists the numeric attributes of the variable's entities. Use it only when the question asks for a superlative (argmax or argmin).
Prerequisite: get_neighbors

argmax(variable, attribute) -> variable
Keeps the entities of the variable with the largest value of the attribute. The attribute must come from an earlier get_attributes call on the same variable. Example: argmax(#1, people.person.birth_year) keeps the youngest people in #1.
Prerequisite: get_attributes

argmin(variable, attribute) -> variable
Keeps the entities of the variable with the smallest value of the attribute. The attribute must come from an earlier get_attributes call on the same variable. Example: argmin(#1, film.film.runtime) keeps the shortest films in #1.
Prerequisite: get_attributes

intersection(variable1, variable2) -> variable
Returns a new variable with the entities present in both variables. Both variables must hold entities of the same type.
Prerequisite: get_neighbors

count(variable) -> int
Returns how many entities the variable holds. Answer a counting question with Final Answer on the counted variable.
Prerequisite: get_neighbors
";

pub const INSTRUCTIONS: &str = "\
You answer questions over a knowledge base by calling tools. Entities from the question are given to you; tool results that are sets of entities are stored in variables named #0, #1, and so on, which later calls can use as arguments.
Work step by step. At step t write exactly two lines:
Thought t: your reasoning about what to do next
Act t: one tool call, for example get_relations(Barack_Obama)
You will then receive Observation t with the result. When a variable holds the answer, write instead:
Final Answer: #k
where #k is that variable. For counting questions, call count on the variable first.

The available tools are:
";

pub const DECOUPLED_INSTRUCTIONS: &str = "\
You answer questions over a knowledge base by calling tools. Entities from the question are given to you; tool results that are sets of entities are stored in variables named #0, #1, and so on, which later calls can use as arguments.
Work step by step. At step t write only one line:
Thought t: your reasoning about what to do next
Do not write the action yourself; it is chosen separately from your thought and appears as Act t, followed by Observation t with the result. To finish, say in your thought which variable holds the answer. For counting questions, count the variable first.

The available tools are:
";

pub const SELECTION_INSTRUCTIONS: &str = "\
You pick the next action for an agent answering a question over a knowledge base. You get the question, the agent's latest thought, and a numbered list of the only actions allowed at this point. Choose the action that carries out the thought; final_answer(#k) ends the episode with variable #k as the answer. Reply with the number of the chosen action and nothing else.";

pub const DEMONSTRATION: &str = "\
Example:
Question: how many songs has the performer of the album north star recorded?
Entities: [North_Star]
Thought 1: I need to find the performer of North_Star, so I first look at its relations.
Act 1: get_relations(North_Star)
Observation 1: [music.album.artist, music.album.release_year, music.album.track, type]
Thought 2: music.album.artist leads to the performer.
Act 2: get_neighbors(North_Star, music.album.artist)
Observation 2: variable #0, which are instances of {music.artist}, 1 entity: {Aurora_Band}
Thought 3: Now I need the songs of #0.
Act 3: get_relations(#0)
Observation 3: [music.artist.track, people.person.nationality, type]
Thought 4: music.artist.track gives the songs.
Act 4: get_neighbors(#0, music.artist.track)
Observation 4: variable #1, which are instances of {music.recording}, 12 entities: {Track_01, Track_02, Track_03, Track_04, Track_05, Track_06, Track_07, Track_08, Track_09, Track_10} (+2 more)
Thought 5: The question asks for a count, so I count #1.
Act 5: count(#1)
Observation 5: 12
Thought 6: #1 is the counted set of songs and answers the question.
Final Answer: #1
";
