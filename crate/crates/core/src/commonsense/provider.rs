use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use super::kb::{KnowledgeBase, SizePrior};
use super::llm::{parse_scene_reply, parse_size_reply, scene_prompt, size_prompt, LlmClient, LlmError};
use super::CommonsenseError;

/// Source of common-sense answers about classes and scenes.
pub trait KnowledgeProvider: Send + Sync {
    fn size_prior(&self, class: &str) -> Result<SizePrior, CommonsenseError>;

    /// `Ok(None)` when the provider has no opinion about the pair.
    fn scene_compatible(&self, scene: &str, class: &str) -> Result<Option<bool>, CommonsenseError>;
}

impl KnowledgeProvider for KnowledgeBase {
    fn size_prior(&self, class: &str) -> Result<SizePrior, CommonsenseError> {
        KnowledgeBase::size_prior(self, class)
            .ok_or_else(|| CommonsenseError::MissingSizePrior(class.to_string()))
    }

    fn scene_compatible(&self, scene: &str, class: &str) -> Result<Option<bool>, CommonsenseError> {
        Ok(KnowledgeBase::scene_compatible(self, scene, class))
    }
}

/// Per-key memo table. Concurrent lookups of the same key wait for a single
/// computation; failures are not cached.
pub struct KeyedCache<K, V> {
    slots: Mutex<HashMap<K, Arc<Mutex<Option<V>>>>>,
}

impl<K: Eq + Hash + Clone, V: Clone> Default for KeyedCache<K, V> {
    fn default() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
        }
    }
}

impl<K: Eq + Hash + Clone, V: Clone> KeyedCache<K, V> {
    pub fn get(&self, key: &K) -> Option<V> {
        let slot = self.slots.lock().unwrap().get(key).cloned()?;
        let value = slot.lock().unwrap().clone();
        value
    }

    pub fn get_or_try_insert_with<E>(
        &self,
        key: K,
        compute: impl FnOnce() -> Result<V, E>,
    ) -> Result<V, E> {
        let slot = self
            .slots
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::new(Mutex::new(None)))
            .clone();
        let mut guard = slot.lock().unwrap();
        if let Some(v) = guard.as_ref() {
            return Ok(v.clone());
        }
        let v = compute()?;
        *guard = Some(v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.slots
            .lock()
            .unwrap()
            .values()
            .filter(|s| s.lock().unwrap().is_some())
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Asks the size question and parses the reply; an unparseable reply falls
/// back to `fallback` when it has the class.
pub fn llm_query_size(
    class: &str,
    client: &dyn LlmClient,
    fallback: Option<&KnowledgeBase>,
) -> Result<SizePrior, CommonsenseError> {
    let kb_entry = || fallback.and_then(|kb| kb.size_prior(class));
    match client.complete(&size_prompt(class)) {
        Ok(reply) => match parse_size_reply(&reply) {
            Some(prior) => Ok(prior),
            None => kb_entry().ok_or(CommonsenseError::Llm(LlmError::Unparseable {
                what: "size triple",
                reply,
            })),
        },
        Err(err) => kb_entry().ok_or(CommonsenseError::Llm(err)),
    }
}

/// Asks whether `class` is normal in `scene`; an ambiguous reply falls back
/// to `fallback` when it knows the scene.
pub fn llm_query_scene(
    class: &str,
    scene: &str,
    client: &dyn LlmClient,
    fallback: Option<&KnowledgeBase>,
) -> Result<bool, CommonsenseError> {
    let kb_entry = || fallback.and_then(|kb| kb.scene_compatible(scene, class));
    match client.complete(&scene_prompt(class, scene)) {
        Ok(reply) => match parse_scene_reply(&reply) {
            Some(v) => Ok(v),
            None => kb_entry().ok_or(CommonsenseError::Llm(LlmError::Unparseable {
                what: "yes/no judgement",
                reply,
            })),
        },
        Err(err) => kb_entry().ok_or(CommonsenseError::Llm(err)),
    }
}

/// Provider backed by the remote model, with per-run caching and the
/// knowledge base as fallback.
pub struct RemoteProvider {
    client: Arc<dyn LlmClient>,
    fallback: Option<KnowledgeBase>,
    sizes: KeyedCache<String, SizePrior>,
    scenes: KeyedCache<(String, String), bool>,
}

impl RemoteProvider {
    pub fn new(client: Arc<dyn LlmClient>, fallback: Option<KnowledgeBase>) -> Self {
        Self {
            client,
            fallback,
            sizes: KeyedCache::default(),
            scenes: KeyedCache::default(),
        }
    }

    pub fn client(&self) -> &Arc<dyn LlmClient> {
        &self.client
    }

    pub fn cached_sizes(&self) -> usize {
        self.sizes.len()
    }
}

impl KnowledgeProvider for RemoteProvider {
    fn size_prior(&self, class: &str) -> Result<SizePrior, CommonsenseError> {
        self.sizes.get_or_try_insert_with(class.to_string(), || {
            llm_query_size(class, self.client.as_ref(), self.fallback.as_ref())
        })
    }

    fn scene_compatible(&self, scene: &str, class: &str) -> Result<Option<bool>, CommonsenseError> {
        self.scenes
            .get_or_try_insert_with((scene.to_string(), class.to_string()), || {
                llm_query_scene(class, scene, self.client.as_ref(), self.fallback.as_ref())
            })
            .map(Some)
    }
}
