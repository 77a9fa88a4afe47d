// Pure client-side game state. Every function returns a fresh object so the
// render step can diff by identity and the tests never fight hidden mutation.

import type { MediaView, MessageResponse, SessionView } from './types.js';

export interface GameState {
  session: SessionView | null;
  feed: MediaView[];
  pending: boolean; // a message is in flight; input is locked
  error: string | null;
  cutscene: { text: string; nextGoal: string; completed: boolean } | null;
  reveals: string[]; // memory flashes from the last turn
}

export function initialState(): GameState {
  return { session: null, feed: [], pending: false, error: null,
           cutscene: null, reveals: [] };
}

export function applySession(state: GameState, session: SessionView): GameState {
  return { ...state, session, error: null };
}

export function applyFeed(state: GameState, items: MediaView[]): GameState {
  return { ...state, feed: items };
}

export function beginSend(state: GameState): GameState {
  if (state.pending) throw new Error('a message is already in flight');
  if (!state.session || state.session.status !== 'active') {
    throw new Error('no active session');
  }
  return { ...state, pending: true, error: null, reveals: [] };
}

export function applyMessage(state: GameState, response: MessageResponse): GameState {
  const fresh = response.unlocked.filter(
    (m) => !state.feed.some((seen) => seen.media_id === m.media_id));
  return {
    ...state,
    session: response.session,
    feed: [...fresh, ...state.feed],
    pending: false,
    error: null,
    reveals: response.fired.map((f) => f.reveal_text).filter((t) => t.length > 0),
    cutscene: response.transition
      ? {
          text: response.transition.cutscene_text,
          nextGoal: response.transition.next_goal_text,
          completed: response.transition.completed,
        }
      : state.cutscene,
  };
}

export function failSend(state: GameState, message: string): GameState {
  return { ...state, pending: false, error: message };
}

export function dismissCutscene(state: GameState): GameState {
  return { ...state, cutscene: null };
}

export function canSend(state: GameState): boolean {
  return !state.pending
    && state.session !== null
    && state.session.status === 'active'
    && state.cutscene === null;
}
