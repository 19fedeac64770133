//! Dialogue architecture for a simulated personal satellite assistant.
//!
//! Utterances pass through a pipeline of translation steps, each of which
//! produces candidate outputs together with meta-outputs:
//! [`lingform`] parses, [`discourse`] resolves against context, [`script`]
//! compiles and optimizes, [`interpreter`] evaluates or executes against
//! the [`world`], and [`dm`] picks the interpretation and the dialogue move.
//! [`service`] wraps sessions for transports; [`transcript`] replays
//! dialogues.

pub mod discourse;
pub mod dm;
pub mod interpreter;
pub mod lingform;
pub mod meta;
pub mod script;
pub mod service;
pub mod transcript;
pub mod words;
pub mod world;
