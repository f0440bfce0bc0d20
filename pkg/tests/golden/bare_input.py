def information_extraction(input_text, entity_attribute, scene_graph):
    """first , extract entities from text .
        second , extract entity chains base on entities .
        third , extract entity chains relation based on entity chains .
        fourth , inferring the visual area coordinate and type in the image based on the scene graph ."""
    input_text = "No images here."
    entity_attribute = ""
    scene_graph = ""
    entity_dic = {}
    chain_dic = {}
    relation_dic = {}
    grounding_dic = {}
    # extacted entities , entity chains , relations and visual areas
