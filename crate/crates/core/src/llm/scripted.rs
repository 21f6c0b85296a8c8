use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Backend, BackendError, ChatMessage, CompletionParams};

/// Serves a fixed list of responses in order, ignoring the prompt.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    served: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            served: Mutex::new(0),
        }
    }

    pub fn served(&self) -> usize {
        *self.served.lock().unwrap()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _messages: &[ChatMessage], _params: &CompletionParams) -> Result<String, BackendError> {
        let next = self.queue.lock().unwrap().pop_front();
        let mut served = self.served.lock().unwrap();
        match next {
            Some(text) => {
                *served += 1;
                Ok(text)
            }
            None => Err(BackendError::Exhausted { served: *served }),
        }
    }

    fn timed(&self) -> bool {
        false
    }
}
