// Wire types, mirroring the service's response models.

export interface TurnView {
  kind: 'player' | 'npc' | 'cutscene';
  text: string;
  timestamp: string;
  level: number;
  fired_trigger_ids: string[];
  media_ids: string[];
}

export interface SessionView {
  session_id: string;
  corpus_hash: string;
  character_name: string;
  status: 'active' | 'completed' | 'abandoned';
  current_level: number;
  final_level: number;
  goal_text: string;
  fired: string[];
  history: TurnView[];
  created_at: string;
  updated_at: string;
}

export interface MediaView {
  media_id: string;
  caption: string;
  asset_url: string;
  unlocked_at: string;
}

export interface FiredView {
  trigger_id: string;
  reveal_text: string;
}

export interface TransitionView {
  cutscene_text: string;
  next_goal_text: string;
  new_level: number;
  completed: boolean;
  media: MediaView[];
}

export interface MessageResponse {
  session: SessionView;
  reply: string;
  blocked: boolean;
  fired: FiredView[];
  transition: TransitionView | null;
  unlocked: MediaView[];
}

export interface FeedResponse {
  items: MediaView[];
}

export interface HealthResponse {
  status: string;
  corpus_id: string;
  corpus_hash: string;
}
